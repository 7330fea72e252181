import argparse
import logging
import sys

from modules import pipeline
from modules.config import load_run_config
from modules.errors import PortfolioToolError

logger = logging.getLogger("script")


class _ArgumentParser(argparse.ArgumentParser):
    """Usage errors exit with code 1 (argparse default is 2, the data-error code here)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _ArgumentParser(
        prog="script.py",
        description="Sector portfolio tool: efficient frontier, eigen portfolios, "
                    "LSTM price forecasts and buy-and-hold backtests.",
    )
    parser.add_argument("--config", help="YAML run config (defaults reproduce the reference setup)")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--output", help="override the config output_dir")
    parser.add_argument("--verbose", action="store_true", help="debug logging")

    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_ArgumentParser)
    sub.required = True
    sub.add_parser("ingest", help="load, align and summarize the price file")
    sub.add_parser("frontier", help="Monte Carlo efficient frontier")
    sub.add_parser("eigen", help="PCA eigen portfolios")
    p_train = sub.add_parser("train", help="train one LSTM per ticker")
    p_train.add_argument("--ticker", action="append", help="train only this ticker (repeatable)")
    p_train.add_argument("--force", action="store_true", help="retrain even if a current checkpoint exists")
    sub.add_parser("predict", help="predict exit-date closes from checkpoints")
    sub.add_parser("backtest", help="allocate, realize and predict portfolio values")
    p_report = sub.add_parser("report", help="summary table over sector bundles")
    p_report.add_argument("bundles", nargs="*", help="bundle.json files (default: all under output_dir)")
    p_plot = sub.add_parser("plot", help="frontier, explained-variance and prediction figures")
    p_plot.add_argument("--ticker", help="ticker for the actual-vs-predicted figure")
    return parser


def run(args) -> int:
    config = load_run_config(args.config, {"seed": args.seed, "output_dir": args.output})

    if args.command == "ingest":
        pipeline.cmd_ingest(config)
    elif args.command == "frontier":
        pipeline.cmd_frontier(config)
    elif args.command == "eigen":
        pipeline.cmd_eigen(config)
    elif args.command == "train":
        pipeline.cmd_train(config, tickers=args.ticker, force=args.force)
    elif args.command == "predict":
        pipeline.cmd_predict(config)
    elif args.command == "backtest":
        pipeline.cmd_backtest(config)
    elif args.command == "report":
        pipeline.cmd_report(config, args.bundles)
    elif args.command == "plot":
        pipeline.cmd_plot(config, args.ticker)
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(message)s",
    )
    try:
        return run(args)
    except PortfolioToolError as e:
        logger.error(f"[Error] {e}")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
