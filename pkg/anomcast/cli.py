"""Command line interface: ``anomcast <stage> --config experiment.yaml [overrides]``."""

import argparse
import logging
import sys

from . import __version__
from .config import load_config
from .core.exceptions import AnomcastError
from .core.utility import exog_policies, model_classes, scales
from .pipeline import run_detect, run_evaluate, run_experiment, run_report, run_train
from .sample import generate_sample

logger = logging.getLogger(__name__)

STAGES = ("detect", "train", "evaluate", "report", "run-all")


def _epochs(text):
    try:
        values = tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError("epochs must be integers separated by commas, got {0!r}".format(text))
    if not values or min(values) < 0:
        raise argparse.ArgumentTypeError("epochs must be non-negative")
    return values


def build_parser():
    parser = argparse.ArgumentParser(prog="anomcast", description="Stock price forecasting through anomalous periods")
    parser.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment YAML file")
    common.add_argument("--seed", type=int, help="override the experiment seed")
    common.add_argument("--scale", choices=list(scales.values) + ["all"], help="dataset scale(s) to run")
    common.add_argument("--model", choices=list(model_classes.values) + ["both"], help="model class(es) to run")
    common.add_argument("--exog-policy", choices=exog_policies.values, help="future sentiment for SARIMAX forecasts")
    common.add_argument("--epochs", type=_epochs, help="LSTM epochs, e.g. 100 or 10,100,1000")
    common.add_argument("--out", help="output directory")
    common.add_argument("--png", action="store_true", help="also render plots as PNG")
    common.add_argument("--no-progress", action="store_true", help="hide progress bars")
    common.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG")

    for stage in STAGES:
        sub.add_parser(stage, parents=[common], help="run the {0} stage".format(stage))

    sample = sub.add_parser("sample", help="write the synthetic sample dataset")
    sample.add_argument("out_dir", help="destination directory")
    sample.add_argument("--seed", type=int, default=0)
    sample.add_argument("--symbols", type=int, default=5)
    sample.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def configure(args):
    config = load_config(args.config)
    return config.replace(
        seed=args.seed,
        scales=None if args.scale is None else tuple(scales.expand(args.scale)),
        models=None if args.model is None else tuple(model_classes.expand(args.model)),
        exog_policy=args.exog_policy,
        epochs=args.epochs,
        out_dir=args.out,
    )


def main(argv=None):
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")

    try:
        if args.command == "sample":
            path = generate_sample(args.out_dir, seed=args.seed, symbols=args.symbols)
            print(path)
            return 0

        config = configure(args)
        progress = not args.no_progress
        if args.command == "detect":
            run_detect(config, progress)
        elif args.command == "train":
            run_train(config, progress)
        elif args.command == "evaluate":
            run_evaluate(config)
        elif args.command == "report":
            run_report(config, args.png)
        else:
            report = run_experiment(config, progress, args.png)
            for cell in report.cells:
                print("{0:<12} {1:<10} {2:8.3f}% {3:10.2f}s".format(cell.model, cell.scale, cell.accuracy, cell.seconds))
    except (AnomcastError, FileNotFoundError) as e:
        logger.error("%s", e)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
