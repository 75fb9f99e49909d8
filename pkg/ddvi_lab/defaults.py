# -*- coding: utf-8 -*-
import math

# Numerics.
DTYPE = "float64"

# Adam; learning rates come from the run config.
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

# Networks. Hidden sizes are the full-size defaults; desk runs shrink them via config.
LATENT_DIM = 2
HIDDEN = 1000
TIME_HIDDEN = 128
TIME_LAYERS = 5
CONDITION_ON = "raw"  # raw | features

# Forward process r(y|z).
DIFFUSION_STEPS = 20
BETA_START = 1e-4
BETA_END = 0.5
SIGMA_MODE = "beta"  # beta | posterior

# Priors.
PRIOR_KINDS = ("pinwheel", "swiss_roll", "square", "gaussian", "mixture")
STRUCTURED_PRIORS = ("pinwheel", "swiss_roll", "square")
PRIOR_CLASSES = {
    "pinwheel": "ddvi_lab.priors.PinwheelPrior",
    "swiss_roll": "ddvi_lab.priors.SwissRollPrior",
    "square": "ddvi_lab.priors.SquarePrior",
    "gaussian": "ddvi_lab.priors.GaussianPrior",
    "mixture": "ddvi_lab.priors.MixturePrior",
}
N_PARTITIONS = 10
PINWHEEL_RADIAL_MEAN = 0.3
PINWHEEL_RADIAL_STD = 0.05
PINWHEEL_RADIAL_OFFSET = 0.3
PINWHEEL_TANGENTIAL_STD = 0.05
PINWHEEL_RATE = 0.25
SWISS_ROLL_NOISE = 0.02
SQUARE_NOISE = 0.06
MIXTURE_COMPONENTS = 20
MIXTURE_SIGMA = 0.1
MIXTURE_RADIUS = 2.0
KDE_BANDWIDTHS = (0.005, 0.008, 0.01, 0.03, 0.05)
KDE_POINTS = 5000
PRIOR_DENSITY_WEIGHT = 5.0

# Metrics.
MMD_SIGMAS = (2.0, 5.0, 10.0, 20.0, 40.0, 80.0)
KNN_K = 20
REPORT_KEYS = ("elbo", "mmd", "latent_nll", "knn_acc", "purity", "completeness", "nmi", "n_eval")

# Data.
IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
PCA_EIGH_MAX_DIM = 2000
GENOTYPE_COMPONENTS = 1000
GENOTYPE_SCALE = 30.0
SYNTHETIC_DIM = 32
SYNTHETIC_LIFT_HIDDEN = 64
SYNTHETIC_LIFT_SCALE = 2.0
SYNTHETIC_OUT_SCALE = 3.0

# Training.
MODES = ("unsup", "semisup", "cluster", "aevb-baseline")
LOG_2PI = math.log(2.0 * math.pi)

# Threads for batch-internal parallel work (0 = sequential).
THREADS_ENV = "DDVI_THREADS"

# Files written by a training run.
CHECKPOINT_NAME = "checkpoint-%(epoch)04d.ckpt"
FINAL_CHECKPOINT_NAME = "final.ckpt"
METRICS_LOG_NAME = "metrics.tsv"
REPORT_NAME = "report.txt"
CONFIG_DUMP_NAME = "config.txt"
NONFINITE_DUMP_NAME = "nonfinite-batch.txt"

# Every config key with its default. Values are kept as text-compatible python
# objects; config.py casts and validates them.
DEFAULT_SETTINGS = {
    "data.kind": "synthetic",  # synthetic | idx | matrix
    "data.images_path": "",
    "data.labels_path": "",
    "data.matrix_path": "",
    "data.delimiter": ",",
    "data.label_column": False,
    "data.n": 4000,
    "data.dim": SYNTHETIC_DIM,
    "data.test_fraction": 0.2,
    "data.pca_components": 0,
    "data.pca_scale": 1.0,
    "data.label_fraction": 0.2,
    "data.lift_seed": 0,
    "data.head": "sigmoid",  # sigmoid (BCE) | identity (MSE)
    "prior.kind": "pinwheel",
    "prior.noise": -1.0,  # negative -> kind default
    "prior.components": MIXTURE_COMPONENTS,
    "prior.mixture_sigma": MIXTURE_SIGMA,
    "prior.mixture_radius": MIXTURE_RADIUS,
    "prior.kde_points": KDE_POINTS,
    "prior.dim": LATENT_DIM,
    "model.latent_dim": LATENT_DIM,
    "model.hidden": HIDDEN,
    "model.time_hidden": TIME_HIDDEN,
    "model.time_layers": TIME_LAYERS,
    "model.condition_on": CONDITION_ON,
    "model.init_seed": 0,
    "diffusion.steps": DIFFUSION_STEPS,
    "diffusion.beta_start": BETA_START,
    "diffusion.beta_end": BETA_END,
    "diffusion.sigma_mode": SIGMA_MODE,
    "train.mode": "unsup",
    "train.lr": 1e-4,
    "train.batch_size": 128,
    "train.epochs": 200,
    "train.sleep_iterations": 1,
    "train.sleep_mode": "alternating",  # alternating | simplified
    "train.fantasy": "sample",  # sample | mean
    "train.beta_reg": 1.0,
    "train.beta_diff": 1.0,
    "train.kl_weight": 0.003,
    "train.kl_schedule": "constant",  # constant | linear
    "train.prior_weight": PRIOR_DENSITY_WEIGHT,
    "train.classifier_weight": 1.0,
    "train.pretrain_epochs": -1,  # -1 -> auto
    "train.n_mc": 1,
    "train.seed": 0,
    "train.checkpoint_every": 10,
    "train.log_every": 10,
    "train.log_wallclock": True,
    "eval.n_mc": 1,
    "eval.n_samples": 1000,
    "eval.knn_k": KNN_K,
    "eval.seed": 1234,
}

# Named presets, applied between the defaults and the config file.
PROFILES = {
    "unsup": {
        "train.mode": "unsup",
        "diffusion.steps": 20,
        "train.kl_weight": 0.003,
        "train.batch_size": 128,
        "train.epochs": 200,
    },
    "semisup": {
        "train.mode": "semisup",
        "diffusion.steps": 100,
        "train.kl_weight": 0.1,
        "train.batch_size": 1024,
        "train.epochs": 30,
        "train.sleep_mode": "simplified",
    },
    "cluster": {
        "train.mode": "cluster",
        "prior.kind": "mixture",
        "diffusion.steps": 20,
        "train.kl_weight": 0.005,
        "train.epochs": 200,
        "data.head": "identity",
    },
    "aevb": {
        "train.mode": "aevb-baseline",
        "train.kl_weight": 0.01,
        "train.kl_schedule": "linear",
        "train.prior_weight": PRIOR_DENSITY_WEIGHT,
        "train.epochs": 200,
    },
    "smoke": {
        "data.kind": "synthetic",
        "data.n": 1000,
        "prior.kind": "pinwheel",
        "prior.kde_points": 1000,
        "model.hidden": 64,
        "model.time_hidden": 64,
        "diffusion.steps": 5,
        "train.epochs": 5,
        "train.lr": 1e-3,
        "eval.n_samples": 200,
    },
}
