# -*- coding: utf-8 -*-
"""``ddvi`` command line: train, eval, plot-latents, sample-prior, make-synth, reproduce."""
import argparse
import os
import sys

from . import __version__, defaults, mob_log
from .config import load_config
from .data_io import load_dataset, write_matrix_csv
from .exceptions import ConfigError
from .metrics import evaluate, model_latents
from .models import DdviModel
from .priors import prior_from_config, sample_prior
from .trainer import Trainer, split_for, write_text
from .utils import derive_seed, get_run_id
from .viz import emit_scatter

EXIT_OK = 0
EXIT_ERROR = 2


def parse_sets(items):
    overrides = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(item, "--set expects key=value")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value
    return overrides


def config_from_args(args):
    overrides = parse_sets(getattr(args, "set", None))
    if getattr(args, "seed", None) is not None:
        overrides["train.seed"] = args.seed
    return load_config(args.config, overrides, args.profile)


def model_from_checkpoint(config, dataset, path):
    model = DdviModel.from_config(config, dataset.dim)
    model.load(path)
    return model


def cmd_train(args):
    config = config_from_args(args)
    out_dir = args.out or os.path.join("runs", get_run_id(config))
    report = Trainer.from_config(config, out_dir).run()
    sys.stdout.write(report.to_text())
    return report


def cmd_eval(args):
    """EvalReport of a checkpoint on the configured test split."""
    config = config_from_args(args)
    dataset = load_dataset(config)
    _, test = split_for(config, dataset)
    model = model_from_checkpoint(config, dataset, args.checkpoint)
    report = evaluate(model, config, test, run_id=get_run_id(config))
    text = report.to_text()
    if args.out:
        write_text(args.out, text)
    sys.stdout.write(text)
    return report


def cmd_plot_latents(args):
    config = config_from_args(args)
    dataset = load_dataset(config)
    _, test = split_for(config, dataset)
    model = model_from_checkpoint(config, dataset, args.checkpoint)
    latents = model_latents(test.items, model, derive_seed(config.eval_seed, 1), config.batch_size)
    path = args.out or "latents.svg"
    emit_scatter(latents, test.labels, path, title="%s latents" % get_run_id(config))
    mob_log.info(f"latent scatter of {len(latents)} test items written to {path}").track_id(get_run_id(config)).commit()
    return path


def cmd_sample_prior(args):
    """Dump prior samples (and optionally their scatter) for inspection."""
    config = config_from_args(args)
    prior = prior_from_config(config)
    n = config.eval_n_samples if args.n is None else args.n
    points, labels = sample_prior(prior, n, derive_seed(config.seed, 9))
    path = args.out or "prior-%s.csv" % config.prior_kind
    write_matrix_csv(path, points, labels)
    if args.plot:
        emit_scatter(points, labels, args.plot, title="%s prior" % config.prior_kind)
    mob_log.info(f"{n} samples of {prior!r} written to {path}").track_id(get_run_id(config)).commit()
    return path


def cmd_make_synth(args):
    config = config_from_args(args)
    if config.data_kind != "synthetic":
        raise ConfigError("data.kind", "make-synth needs data.kind=synthetic, got %r" % config.data_kind)
    dataset = load_dataset(config)
    path = args.out or "synthetic-%s.csv" % config.prior_kind
    write_matrix_csv(path, dataset.items, dataset.labels)
    mob_log.info(f"synthetic dataset {dataset.name}: {len(dataset)} x {dataset.dim} written to {path}") \
        .track_id(get_run_id(config)).commit()
    return path


def cmd_reproduce(args):
    from .experiments import EXPERIMENTS, reproduce

    names = args.only or list(EXPERIMENTS)
    seeds = tuple(range(args.seeds))
    fidelity, results = reproduce(args.out or "reproduce", names, seeds)
    for result in results:
        sys.stdout.write("%s: %s %s\n" % (result.name, dict(result.means), "pass" if result.passed else "FAIL"))
    sys.stdout.write("sampler-fidelity: %s\n" % ("pass" if fidelity else "FAIL"))
    return fidelity and all(r.passed for r in results)


def _common(parser, checkpoint=False):
    parser.add_argument("--config", default=None, help="config file of key=value lines")
    parser.add_argument("--profile", default=None, choices=sorted(defaults.PROFILES), help="named preset")
    parser.add_argument("--seed", type=int, default=None, help="overrides train.seed")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")
    parser.add_argument("--out", default=None, help="output path")
    if checkpoint:
        parser.add_argument("--checkpoint", required=True, help="weight checkpoint to load")


def build_parser():
    parser = argparse.ArgumentParser(prog="ddvi", description="Denoising diffusion variational inference lab")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model; --out is the run directory")
    _common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on the test split")
    _common(p, checkpoint=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("plot-latents", help="SVG scatter of test-split latents")
    _common(p, checkpoint=True)
    p.set_defaults(func=cmd_plot_latents)

    p = sub.add_parser("sample-prior", help="dump prior samples as CSV")
    _common(p)
    p.add_argument("--n", type=int, default=None, help="number of samples (default eval.n_samples)")
    p.add_argument("--plot", default=None, help="also write an SVG scatter here")
    p.set_defaults(func=cmd_sample_prior)

    p = sub.add_parser("make-synth", help="write the configured synthetic dataset as CSV")
    _common(p)
    p.set_defaults(func=cmd_make_synth)

    p = sub.add_parser("reproduce", help="run the scaled-down directional experiments")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--only", action="append", default=None, help="experiment name (repeatable)")
    p.add_argument("--seeds", type=int, default=3, help="seeds per arm")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except (ValueError, RuntimeError, OSError) as e:
        mob_log.error(f"{args.command} failed: {e}").track_id("").commit()
        sys.stderr.write("error: %s\n" % e)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
