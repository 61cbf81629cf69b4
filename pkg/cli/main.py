#!/usr/bin/env python3
"""
Rule extraction from local explanations, with ThresholdPruning.

Subcommands:
- extract: data + black-box predictions + attributions -> rule-model file
- prune:   rule model + reference set -> pruned model, trace, win table, changes
- eval:    rule model(s) + held-out set -> F1 / Size / Amb / coverage report (CSV + Markdown)
- compare: two evaluation reports -> relative-change CSV
- demo:    synthetic tasks end to end, including surrogate training and occlusion attributions

Exit codes: 0 success, 2 input/config error, 3 internal invariant violation.
"""

import argparse
import sys
from pathlib import Path
from typing import List, Optional

from cli.commands import COMMANDS, DEMO_THETA
from cli.config import config_from_args
from rules import settings
from rules.errors import exit_code_for


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cfire",
        description="Extract, prune and evaluate DNF rule models built from local feature attributions",
    )
    parser.add_argument("--log-level", default=None, help="Logging level (default: CFIRE_LOG_LEVEL or WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--data", type=Path, help="Feature CSV (header of feature names, one sample per row)")
        p.add_argument("--preds", type=Path, help="Single-column CSV of black-box predictions")
        p.add_argument("--attr", type=Path, help="n x d attribution CSV with the data's header")
        p.add_argument("--labels", type=Path, help="Single-column CSV of ground-truth labels (optional F1 column)")
        p.add_argument("--ref-data", dest="ref_data", type=Path, help="Reference/extraction set for the F1 (X) column")
        p.add_argument("--ref-preds", dest="ref_preds", type=Path, help="Black-box predictions for --ref-data")
        p.add_argument("--model", type=Path, nargs="+", help="Rule-model file(s)")
        p.add_argument("--before", type=Path, help="Evaluation report CSV before pruning")
        p.add_argument("--after", type=Path, help="Evaluation report CSV after pruning")
        p.add_argument("--out", type=Path, help="Output file or directory")
        p.add_argument("--theta", type=float, help="Pruning tolerance in [0, 1]")
        p.add_argument("--min-support", dest="min_support", type=float, help="Minimum support as a fraction of a class's transactions")
        p.add_argument("--top-k", dest="top_k", type=int, help="Important dimensions per sample (top_k binarization)")
        p.add_argument("--binarize", choices=["top_k", "abs_threshold", "positive"], help="Binarization mode")
        p.add_argument("--tau", type=float, help="Threshold on |score| for abs_threshold binarization")
        p.add_argument("--min-precision", dest="min_precision", type=float, help="Minimum candidate precision")
        p.add_argument("--cover-target", dest="cover_target", type=float, help="Fraction of a class the cover must reach")
        p.add_argument("--f1-target", dest="f1_target", choices=["fidelity", "ground_truth"], help="Headline F1 target")
        p.add_argument("--average", choices=["macro", "weighted"], help="F1 averaging scheme")
        p.add_argument("--seed", type=int, help="Random seed (demo)")
        p.add_argument("--tasks", type=int, help="Number of synthetic tasks (demo)")
        p.add_argument("--samples", type=int, help="Samples per synthetic task (demo)")
        p.add_argument("--workers", type=int, help="Threads for per-class extraction")
        return p

    add("extract", "Extract a rule model from data, predictions and attributions")
    add("prune", "Apply ThresholdPruning to a rule model")
    add("eval", "Evaluate rule models on a held-out set")
    add("compare", "Relative changes between two evaluation reports")
    add("demo", "Run the full pipeline on synthetic data")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "demo" and args.theta is None:
        args.theta = DEMO_THETA

    try:
        settings.configure_logging(None if args.log_level is None else args.log_level.upper())
        config = config_from_args(args)
        return COMMANDS[args.command](config)
    except Exception as e:
        code = exit_code_for(e)
        print(f"error: {e}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
