# -*- coding: utf-8 -*-
"""Run configuration.

Values are resolved on a scrapy ``BaseSettings`` object, whose per-key
priorities record where each value came from:

    default (defaults.py) < profile < config file < command-line flag
"""
import dataclasses
import re
from dataclasses import dataclass, field

from scrapy.settings import SETTINGS_PRIORITIES, BaseSettings

from . import defaults
from .exceptions import ConfigError

# Shortcut maps 'setting name' -> 'field name'.
SETTINGS_PARAMS_MAP = {
    "data.kind": "data_kind",
    "data.images_path": "images_path",
    "data.labels_path": "labels_path",
    "data.matrix_path": "matrix_path",
    "data.delimiter": "delimiter",
    "data.label_column": "label_column",
    "data.n": "n_items",
    "data.dim": "data_dim",
    "data.test_fraction": "test_fraction",
    "data.pca_components": "pca_components",
    "data.pca_scale": "pca_scale",
    "data.label_fraction": "label_fraction",
    "data.lift_seed": "lift_seed",
    "data.head": "head",
    "prior.kind": "prior_kind",
    "prior.noise": "prior_noise",
    "prior.components": "mixture_components",
    "prior.mixture_sigma": "mixture_sigma",
    "prior.mixture_radius": "mixture_radius",
    "prior.kde_points": "kde_points",
    "prior.dim": "prior_dim",
    "model.latent_dim": "latent_dim",
    "model.hidden": "hidden",
    "model.time_hidden": "time_hidden",
    "model.time_layers": "time_layers",
    "model.condition_on": "condition_on",
    "model.init_seed": "init_seed",
    "diffusion.steps": "steps",
    "diffusion.beta_start": "beta_start",
    "diffusion.beta_end": "beta_end",
    "diffusion.sigma_mode": "sigma_mode",
    "train.mode": "mode",
    "train.lr": "lr",
    "train.batch_size": "batch_size",
    "train.epochs": "epochs",
    "train.sleep_iterations": "sleep_iterations",
    "train.sleep_mode": "sleep_mode",
    "train.fantasy": "fantasy",
    "train.beta_reg": "beta_reg",
    "train.beta_diff": "beta_diff",
    "train.kl_weight": "kl_weight",
    "train.kl_schedule": "kl_schedule",
    "train.prior_weight": "prior_weight",
    "train.classifier_weight": "classifier_weight",
    "train.pretrain_epochs": "pretrain_epochs",
    "train.n_mc": "n_mc",
    "train.seed": "seed",
    "train.checkpoint_every": "checkpoint_every",
    "train.log_every": "log_every",
    "train.log_wallclock": "log_wallclock",
    "eval.n_mc": "eval_n_mc",
    "eval.n_samples": "eval_n_samples",
    "eval.knn_k": "knn_k",
    "eval.seed": "eval_seed",
}

CHOICES = {
    "data.kind": ("synthetic", "idx", "matrix"),
    "data.head": ("sigmoid", "identity"),
    "prior.kind": defaults.PRIOR_KINDS,
    "model.condition_on": ("raw", "features"),
    "diffusion.sigma_mode": ("beta", "posterior"),
    "train.mode": defaults.MODES,
    "train.sleep_mode": ("alternating", "simplified"),
    "train.fantasy": ("mean", "sample"),
    "train.kl_schedule": ("constant", "linear"),
}

# key -> (lowest allowed, whether the bound is inclusive)
LOWER_BOUNDS = {
    "data.n": (0, True),
    "data.dim": (1, True),
    "data.test_fraction": (0, True),
    "data.pca_components": (0, True),
    "data.pca_scale": (0, False),
    "data.label_fraction": (0, True),
    "prior.noise": (-1, True),
    "prior.components": (1, True),
    "prior.mixture_sigma": (0, False),
    "prior.mixture_radius": (0, True),
    "prior.kde_points": (1, True),
    "prior.dim": (1, True),
    "model.latent_dim": (1, True),
    "model.hidden": (1, True),
    "model.time_hidden": (1, True),
    "model.time_layers": (1, True),
    "diffusion.steps": (1, True),
    "diffusion.beta_start": (0, False),
    "diffusion.beta_end": (0, False),
    "train.lr": (0, True),
    "train.batch_size": (1, True),
    "train.epochs": (0, True),
    "train.sleep_iterations": (0, True),
    "train.beta_reg": (0, True),
    "train.beta_diff": (0, True),
    "train.kl_weight": (0, True),
    "train.prior_weight": (0, True),
    "train.classifier_weight": (0, True),
    "train.pretrain_epochs": (-1, True),
    "train.n_mc": (1, True),
    "train.checkpoint_every": (0, True),
    "train.log_every": (1, True),
    "eval.n_mc": (1, True),
    "eval.n_samples": (0, True),
    "eval.knn_k": (1, True),
}

# key -> (highest allowed, whether the bound is inclusive)
UPPER_BOUNDS = {
    "data.test_fraction": (1.0, False),
    "data.label_fraction": (1.0, True),
    "diffusion.beta_start": (1.0, False),
    "diffusion.beta_end": (1.0, False),
}

PROVENANCE = {
    SETTINGS_PRIORITIES["default"]: "default",
    SETTINGS_PRIORITIES["command"]: "profile",
    SETTINGS_PRIORITIES["project"]: "file",
    SETTINGS_PRIORITIES["cmdline"]: "flag",
}

_INLINE_COMMENT = re.compile(r"\s+#")
_TRUE = ("1", "true", "yes", "on")
_FALSE = ("0", "false", "no", "off")


def cast_value(key, value, line=None):
    """Cast a text value to the type of the key's default."""
    default = defaults.DEFAULT_SETTINGS[key]
    if not isinstance(value, str):
        if isinstance(default, float) and isinstance(value, int) and not isinstance(value, bool):
            return float(value)
        return value
    text = value.strip()
    if isinstance(default, bool):
        if text.lower() in _TRUE:
            return True
        if text.lower() in _FALSE:
            return False
        raise ConfigError(key, "expected a boolean, got %r" % value, line)
    if isinstance(default, int):
        try:
            return int(text)
        except ValueError:
            raise ConfigError(key, "expected an integer, got %r" % value, line)
    if isinstance(default, float):
        try:
            return float(text)
        except ValueError:
            raise ConfigError(key, "expected a number, got %r" % value, line)
    if key == "data.delimiter":
        return "\t" if text.lower() in ("\\t", "tab") else value
    return text


def parse_lines(text):
    """``[(key, raw value, line number)]`` of a config file; rejects unknown keys."""
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(line, "expected key=value", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in defaults.DEFAULT_SETTINGS:
            raise ConfigError(key, "unknown key", lineno)
        if key != "data.delimiter":
            value = _INLINE_COMMENT.split(value, 1)[0].strip()
        entries.append((key, value, lineno))
    return entries


@dataclass
class RunConfig(object):
    """Every hyper-parameter of a run, with where each value came from."""

    data_kind: str = defaults.DEFAULT_SETTINGS["data.kind"]
    images_path: str = ""
    labels_path: str = ""
    matrix_path: str = ""
    delimiter: str = ","
    label_column: bool = False
    n_items: int = defaults.DEFAULT_SETTINGS["data.n"]
    data_dim: int = defaults.SYNTHETIC_DIM
    test_fraction: float = defaults.DEFAULT_SETTINGS["data.test_fraction"]
    pca_components: int = 0
    pca_scale: float = 1.0
    label_fraction: float = defaults.DEFAULT_SETTINGS["data.label_fraction"]
    lift_seed: int = 0
    head: str = "sigmoid"
    prior_kind: str = defaults.DEFAULT_SETTINGS["prior.kind"]
    prior_noise: float = -1.0
    mixture_components: int = defaults.MIXTURE_COMPONENTS
    mixture_sigma: float = defaults.MIXTURE_SIGMA
    mixture_radius: float = defaults.MIXTURE_RADIUS
    kde_points: int = defaults.KDE_POINTS
    prior_dim: int = defaults.LATENT_DIM
    latent_dim: int = defaults.LATENT_DIM
    hidden: int = defaults.HIDDEN
    time_hidden: int = defaults.TIME_HIDDEN
    time_layers: int = defaults.TIME_LAYERS
    condition_on: str = defaults.CONDITION_ON
    init_seed: int = 0
    steps: int = defaults.DIFFUSION_STEPS
    beta_start: float = defaults.BETA_START
    beta_end: float = defaults.BETA_END
    sigma_mode: str = defaults.SIGMA_MODE
    mode: str = "unsup"
    lr: float = defaults.DEFAULT_SETTINGS["train.lr"]
    batch_size: int = defaults.DEFAULT_SETTINGS["train.batch_size"]
    epochs: int = defaults.DEFAULT_SETTINGS["train.epochs"]
    sleep_iterations: int = 1
    sleep_mode: str = "alternating"
    fantasy: str = "sample"
    beta_reg: float = 1.0
    beta_diff: float = 1.0
    kl_weight: float = defaults.DEFAULT_SETTINGS["train.kl_weight"]
    kl_schedule: str = "constant"
    prior_weight: float = defaults.PRIOR_DENSITY_WEIGHT
    classifier_weight: float = 1.0
    pretrain_epochs: int = -1
    n_mc: int = 1
    seed: int = 0
    checkpoint_every: int = 10
    log_every: int = 10
    log_wallclock: bool = True
    eval_n_mc: int = 1
    eval_n_samples: int = defaults.DEFAULT_SETTINGS["eval.n_samples"]
    knn_k: int = defaults.KNN_K
    eval_seed: int = defaults.DEFAULT_SETTINGS["eval.seed"]
    profile: str = ""
    provenance: dict = field(default_factory=dict, compare=False)

    @classmethod
    def from_settings(cls, settings, profile=""):
        kwargs = {}
        provenance = {}
        for key, name in SETTINGS_PARAMS_MAP.items():
            kwargs[name] = settings.get(key)
            provenance[key] = PROVENANCE.get(settings.getpriority(key), "default")
        return cls(profile=profile, provenance=provenance, **kwargs)

    def get(self, key):
        return getattr(self, SETTINGS_PARAMS_MAP[key])

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    @property
    def pretrain(self):
        """Epochs of unconditional pretraining (auto: a tenth of the run for structured priors)."""
        if self.pretrain_epochs >= 0:
            return self.pretrain_epochs
        if self.mode == "aevb-baseline" or self.prior_kind not in defaults.STRUCTURED_PRIORS:
            return 0
        return max(1, self.epochs // 10) if self.epochs else 0

    def to_text(self):
        lines = ["# profile: %s" % (self.profile or "none")]
        for key in SETTINGS_PARAMS_MAP:
            value = self.get(key)
            if isinstance(value, bool):
                value = "true" if value else "false"
            source = self.provenance.get(key, "default")
            if key == "data.delimiter":
                lines.append("# %s: %s" % (key, source))
                lines.append("%s=%s" % (key, "tab" if value == "\t" else value))
                continue
            lines.append("%s=%s  # %s" % (key, value, source))
        return "\n".join(lines) + "\n"


def _validate(settings, lines):
    def fail(key, reason):
        raise ConfigError(key, reason, lines.get(key))

    for key, choices in CHOICES.items():
        if settings.get(key) not in choices:
            fail(key, "must be one of %s, got %r" % (", ".join(choices), settings.get(key)))
    for key, (low, inclusive) in LOWER_BOUNDS.items():
        value = settings.get(key)
        if value < low or (not inclusive and value == low):
            fail(key, "must be %s %s, got %r" % (">=" if inclusive else ">", low, value))
    for key, (high, inclusive) in UPPER_BOUNDS.items():
        value = settings.get(key)
        if value > high or (not inclusive and value == high):
            fail(key, "must be %s %s, got %r" % ("<=" if inclusive else "<", high, value))
    if settings.get("diffusion.beta_start") > settings.get("diffusion.beta_end"):
        fail("diffusion.beta_start", "must not exceed diffusion.beta_end")
    if settings.get("data.kind") == "idx" and not settings.get("data.images_path"):
        fail("data.images_path", "required when data.kind=idx")
    if settings.get("data.kind") == "matrix" and not settings.get("data.matrix_path"):
        fail("data.matrix_path", "required when data.kind=matrix")


def _align_latent_dims(settings, lines):
    """prior.dim follows model.latent_dim unless it was set explicitly (and vice versa)."""
    prior_dim, latent_dim = settings.get("prior.dim"), settings.get("model.latent_dim")
    if prior_dim == latent_dim:
        return
    default = SETTINGS_PRIORITIES["default"]
    if settings.getpriority("prior.dim") == default:
        settings.set("prior.dim", latent_dim, priority=settings.getpriority("model.latent_dim"))
    elif settings.getpriority("model.latent_dim") == default:
        settings.set("model.latent_dim", prior_dim, priority=settings.getpriority("prior.dim"))
    else:
        raise ConfigError("prior.dim", "must equal model.latent_dim (%d), got %d" % (latent_dim, prior_dim),
                          lines.get("prior.dim"))


def build_settings(text="", overrides=None, profile=None):
    """Resolve defaults, profile, file text and flag overrides on one settings object."""
    settings = BaseSettings()
    settings.setdict(defaults.DEFAULT_SETTINGS, priority="default")
    if profile:
        if profile not in defaults.PROFILES:
            raise ConfigError("--profile", "unknown profile %r (choose from %s)"
                              % (profile, ", ".join(sorted(defaults.PROFILES))))
        settings.setdict(defaults.PROFILES[profile], priority="command")
    lines = {}
    for key, value, lineno in parse_lines(text or ""):
        settings.set(key, cast_value(key, value, lineno), priority="project")
        lines[key] = lineno
    for key, value in (overrides or {}).items():
        if key not in defaults.DEFAULT_SETTINGS:
            raise ConfigError(key, "unknown key")
        settings.set(key, cast_value(key, value), priority="cmdline")
        lines.pop(key, None)
    _align_latent_dims(settings, lines)
    _validate(settings, lines)
    return settings


def parse_config(text="", overrides=None, profile=None):
    """Parse config text (flat ``key=value`` lines, ``#`` comments) into a RunConfig.

    Parameters
    ----------
    text : str
        Contents of a config file; empty means all defaults.
    overrides : dict, optional
        Dotted key -> value from command-line flags; they win over the file.
    profile : str, optional
        Named preset from ``defaults.PROFILES``, applied below the file.

    Returns
    -------
    RunConfig
        Fully resolved, with ``provenance`` naming default/profile/file/flag per key.

    Raises
    ------
    ConfigError
        Unknown key, unparseable value or value out of range; the message
        names the key and, for file values, the line.
    """
    return RunConfig.from_settings(build_settings(text, overrides, profile), profile=profile or "")


def load_config(path=None, overrides=None, profile=None):
    text = ""
    if path:
        with open(path, encoding="utf-8") as f:
            text = f.read()
    return parse_config(text, overrides, profile)
