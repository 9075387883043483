"""Command-line entry point: ``bgshift <verb> [options]``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from . import __version__, pipeline
from .config import load_config
from .errors import BgShiftError, ConfigInvalid, PartialFailure

VERBS = ("select", "augment", "gen-bg", "replace", "build-bench", "corrupt", "eval",
         "loss", "grad-check", "make-fixture")


def _parse_set(values):
    out = {}
    for item in values or []:
        if "=" not in item:
            raise ConfigInvalid(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _parse_pairs(values):
    out = {}
    for item in values or []:
        name, _, path = item.partition("=")
        if not path:
            raise ConfigInvalid(f"expected NAME=PATH, got {item!r}")
        out[name] = path
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("global options")
    g.add_argument("--config", help="YAML or JSON configuration file")
    g.add_argument("--seed", type=int, help="64-bit run seed")
    g.add_argument("--workers", type=int, help="worker threads for per-image work")
    g.add_argument("--out", help="output directory")
    g.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override any config key, e.g. --set replace.k=6")
    g.add_argument("-v", "--verbose", action="store_true")

    io = argparse.ArgumentParser(add_help=False)
    io.add_argument("--annotations", help="annotation document (JSON)")
    io.add_argument("--masks", help="mask directory")

    parser = argparse.ArgumentParser(prog="bgshift", description=__doc__)
    parser.add_argument("--version", action="version", version=f"bgshift {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("select", parents=[common, io], help="category-covering subset selection")
    p.add_argument("--budget", type=int)
    p.add_argument("--reduction-factor", type=float)

    p = sub.add_parser("augment", parents=[common, io], help="insert objects of new categories")
    p.add_argument("--selected", help="selected-ids file from 'select'")
    p.add_argument("--repeat", type=int, help="insertions per image (default 1)")

    p = sub.add_parser("gen-bg", parents=[common], help="generate the background pool")
    p.add_argument("--backend", choices=["stub", "http"])
    p.add_argument("--endpoint", help="HTTP image-generation endpoint")
    p.add_argument("--seeds-per-prompt", type=int)

    p = sub.add_parser("replace", parents=[common, io], help="background replacement variants")
    p.add_argument("--backgrounds", help="background manifest (JSON lines)")
    p.add_argument("--k", type=int, help="variants per image")
    p.add_argument("--include-original", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--erode", action=argparse.BooleanOptionalAction, default=None,
                   help="erode masks by one pixel before compositing")

    p = sub.add_parser("build-bench", parents=[common, io], help="background-shift / corruption benchmark")
    p.add_argument("--backgrounds", help="benchmark background manifest")
    p.add_argument("--exclude", help="training background manifest that must not overlap")
    p.add_argument("--variants", type=int, help="background variants per image (default 3)")
    p.add_argument("--corruptions", action=argparse.BooleanOptionalAction, default=None)

    p = sub.add_parser("corrupt", parents=[common, io], help="apply photometric corruptions")
    p.add_argument("--kind", action="append", help="corruption kind (repeatable) or 'all'")
    p.add_argument("--severity", type=int)
    p.add_argument("--param", type=float, help="override the severity table value")

    p = sub.add_parser("eval", parents=[common], help="AP per partition, mFULL and rFULL")
    p.add_argument("--gt", required=True, help="ground-truth annotation document")
    p.add_argument("--pred", required=True, help="predictions on the clean set")
    p.add_argument("--corrupted", action="append", metavar="NAME=PATH",
                   help="predictions on a corrupted copy (repeatable)")

    p = sub.add_parser("loss", parents=[common], help="consistency loss of feature batches")
    p.add_argument("--image-features", required=True)
    p.add_argument("--text-features")
    p.add_argument("--prenormalize", action=argparse.BooleanOptionalAction, default=None)

    p = sub.add_parser("grad-check", parents=[common], help="finite-difference gradient check")
    p.add_argument("features", nargs="+")
    p.add_argument("--h", type=float, default=1e-4)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--prenormalize", action=argparse.BooleanOptionalAction, default=None)

    p = sub.add_parser("make-fixture", parents=[common], help="write a synthetic test corpus")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--size", type=int, default=128)
    return parser


def _overrides(args) -> dict:
    flag_keys = {
        "seed": "seed", "workers": "workers", "out": "out", "annotations": "annotations",
        "masks": "masks", "backgrounds": "backgrounds", "selected": "selected",
        "budget": "select.budget", "reduction_factor": "select.reduction_factor",
        "repeat": "augment.repeat", "backend": "genbg.backend", "endpoint": "genbg.endpoint",
        "seeds_per_prompt": "genbg.seeds_per_prompt", "k": "replace.k",
        "include_original": "replace.include_original", "erode": "replace.erode",
        "exclude": "bench.exclude", "variants": "bench.variants_per_image",
        "corruptions": "bench.corruptions", "prenormalize": "loss.prenormalize",
    }
    out = _parse_set(args.set)
    for attr, key in flag_keys.items():
        value = getattr(args, attr, None)
        if value is not None:
            out[key] = value
    return out


def run(argv=None) -> dict:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    cfg = load_config(args.config, _overrides(args))
    verb = args.verb
    if verb == "select":
        return pipeline.cmd_select(cfg)
    if verb == "augment":
        return pipeline.cmd_augment(cfg)
    if verb == "gen-bg":
        return pipeline.cmd_genbg(cfg)
    if verb == "replace":
        return pipeline.cmd_replace(cfg)
    if verb == "build-bench":
        return pipeline.cmd_build_bench(cfg)
    if verb == "corrupt":
        return pipeline.cmd_corrupt(cfg, args.kind or ["all"], args.severity, args.param)
    if verb == "eval":
        return pipeline.cmd_eval(cfg, args.gt, args.pred, _parse_pairs(args.corrupted))
    if verb == "loss":
        return pipeline.cmd_loss(cfg, args.image_features, args.text_features)
    if verb == "grad-check":
        return pipeline.cmd_grad_check(cfg, args.features, args.h, args.tol)
    if verb == "make-fixture":
        return pipeline.cmd_make_fixture(cfg, args.n, args.size, args.size)
    raise ConfigInvalid(f"unknown verb {verb}")


def main(argv=None) -> int:
    try:
        result = run(argv)
    except ConfigInvalid as exc:
        print(f"bgshift: config error: {exc}", file=sys.stderr)
        return 2
    except PartialFailure as exc:
        print(f"bgshift: {exc}", file=sys.stderr)
        for prompt, seed, msg in exc.failed:
            print(f"  seed {seed}: {prompt[:60]!r}: {msg}", file=sys.stderr)
        return 3
    except BgShiftError as exc:
        print(f"bgshift: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(result, indent=1, sort_keys=True, default=str))
    if isinstance(result, dict) and result.get("passed") is False:
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
