"""Command-line pipeline: normalize, split, train, eval, stats.

Exit codes: 0 success, 1 input/validation error, 2 numerical failure.
All randomness flows from ``--seed`` (default 42); single-threaded runs of
any subcommand are replayable bit for bit.  No subcommand writes over its
inputs.
"""

from __future__ import annotations

import argparse
import os
import sys
from typing import Optional

from . import baselines, model as gm, ranking, training
from .normalize import NF1, NormalizedOntology, normal_axiom_to_text, normalize
from .parser import ParseError, parse_ontology
from .training import NumericalError, SplitSpec, TrainConfig


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would sys.exit(2); we map to 1
        raise _CliError(message)


def _read_lines(path: str) -> list[str]:
    if not os.path.isfile(path):
        raise _CliError(f"input file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read().splitlines()


def _check_distinct(inputs, outputs) -> None:
    taken = {os.path.abspath(p) for p in inputs if p}
    for out in outputs:
        if out and os.path.abspath(out) in taken:
            raise _CliError(f"refusing to overwrite input file: {out}")


def _load_normalized(path: str) -> NormalizedOntology:
    axioms, _ = parse_ontology(_read_lines(path))
    return normalize(axioms)


def _write_axiom_file(path: str, header: list, lines: list) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for comment in header:
            fh.write(f"# {comment}\n")
        for line in lines:
            fh.write(line + "\n")


def cmd_stats(args) -> int:
    axioms, stats = parse_ontology(_read_lines(args.input))
    onto = normalize(axioms)
    print(f"axioms\t{stats.axiom_count}")
    print(f"classes\t{stats.class_count}")
    print(f"relations\t{stats.relation_count}")
    print(f"individuals\t{stats.individual_count}")
    print(f"normalized_axioms\t{len(onto.axioms)}")
    print(f"normalized_classes\t{len(onto.classes)}")
    print(f"normalized_relations\t{len(onto.relations)}")
    print(f"fresh_classes\t{onto.fresh_count}")
    return 0


def cmd_normalize(args) -> int:
    _check_distinct([args.input], [args.output, f"{args.output}.fresh.tsv"])
    axioms, _ = parse_ontology(_read_lines(args.input))
    onto = normalize(axioms)
    lines = [normal_axiom_to_text(ax, onto) for ax in onto.axioms]
    _write_axiom_file(
        args.output,
        [f"geodl normalize source={os.path.basename(args.input)}",
         f"axioms={len(lines)} fresh_classes={onto.fresh_count}"],
        lines,
    )
    with open(f"{args.output}.fresh.tsv", "w", encoding="utf-8") as fh:
        fh.write("fresh\tdefinition\n")
        for name, definition in onto.fresh_definitions.items():
            fh.write(f"{name}\t{definition}\n")
    return 0


def _parse_fractions(text: str) -> tuple:
    parts = text.split(",")
    if len(parts) != 3:
        raise _CliError("--fractions expects three comma-separated numbers")
    try:
        return tuple(float(p) for p in parts)
    except ValueError:
        raise _CliError(f"bad --fractions value {text!r}") from None


def cmd_split(args) -> int:
    seed = args.seed if args.seed is not None else 42
    fractions = _parse_fractions(args.fractions) if args.fractions else (0.7, 0.2, 0.1)
    onto = _load_normalized(args.input)
    spec = SplitSpec(
        train_frac=fractions[0], valid_frac=fractions[1],
        test_frac=fractions[2], seed=seed,
    )
    result = training.split(onto, spec)
    os.makedirs(args.out_dir, exist_ok=True)
    frac_text = ",".join(repr(f) for f in fractions)
    for part, axioms in (
        ("train", result.train), ("valid", result.valid), ("test", result.test)
    ):
        path = os.path.join(args.out_dir, f"{part}.el")
        _check_distinct([args.input], [path])
        _write_axiom_file(
            path,
            [f"geodl split part={part} seed={seed} fractions={frac_text}"],
            [normal_axiom_to_text(ax, onto) for ax in axioms],
        )
    with open(os.path.join(args.out_dir, "split.tsv"), "w", encoding="utf-8") as fh:
        fh.write(f"eligible_nf1\t{result.eligible_count}\n")
        fh.write(f"train_axioms\t{len(result.train)}\n")
        fh.write(f"valid_axioms\t{len(result.valid)}\n")
        fh.write(f"test_axioms\t{len(result.test)}\n")
        fh.write(f"swaps\t{result.swaps}\n")
        fh.write(f"candidate_count\t{result.candidate_count}\n")
        fh.write(f"seed\t{seed}\n")
        fh.write(f"fractions\t{frac_text}\n")
    return 0


def _build_config(args) -> TrainConfig:
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            cfg = training.parse_config(fh.read())
    else:
        cfg = TrainConfig()
    if args.variant:
        cfg.variant = gm.parse_variant(args.variant)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads
    cfg.validate()
    return cfg


def _sibling_valid_nf1(train_path: str, onto: NormalizedOntology):
    """Early-stopping data: a valid.el next to the training file, if present."""
    candidate = os.path.join(os.path.dirname(os.path.abspath(train_path)),
                             "valid.el")
    if not os.path.isfile(candidate) or os.path.abspath(candidate) == \
            os.path.abspath(train_path):
        return None
    axioms, _ = parse_ontology(_read_lines(candidate))
    valid_onto = normalize(axioms)
    valid = []
    for ax in valid_onto.axioms:
        if not isinstance(ax, NF1) or ax.c == ax.d:
            continue
        name_c = valid_onto.class_name(ax.c)
        name_d = valid_onto.class_name(ax.d)
        if name_c in onto.class_index and name_d in onto.class_index:
            valid.append(NF1(onto.class_index[name_c], onto.class_index[name_d]))
    return valid or None


def cmd_train(args) -> int:
    log_out = args.log_out or f"{args.model_out}.log.tsv"
    _check_distinct([args.train_file, args.config], [args.model_out, log_out])
    cfg = _build_config(args)
    onto = _load_normalized(args.train_file)
    class_names = [info.name for info in onto.classes]

    if args.model:
        if args.model not in baselines.MODELS:
            raise _CliError(
                f"--model must be one of {', '.join(baselines.MODELS)}"
            )
        triples = baselines.extract_triples(onto)
        loss_log: list = []
        state = baselines.train_baseline(
            args.model, triples,
            num_entities=len(onto.classes),
            num_relations=len(onto.relations) + 1,
            dim=cfg.dim, margin=cfg.margin, lr=cfg.lr, epochs=cfg.epochs,
            batch_size=cfg.batch_size, seed=cfg.seed, loss_log=loss_log,
        )
        baselines.save_baseline(
            args.model_out, state, class_names,
            baselines.baseline_relation_names(onto),
        )
        with open(log_out, "w", encoding="utf-8") as fh:
            fh.write("epoch\ttotal_loss\n")
            for epoch, loss in enumerate(loss_log):
                fh.write(f"{epoch}\t{loss:.10g}\n")
        return 0

    valid_nf1 = _sibling_valid_nf1(args.train_file, onto)
    result = training.train(onto, cfg, valid_nf1=valid_nf1)
    gm.save_model(
        args.model_out, result.state, class_names,
        [info.name for info in onto.relations], cfg.variant, cfg.margin,
    )
    training.write_log(log_out, result.log)
    return 0


def _load_tests(path: str, name_to_id: dict) -> list:
    axioms, _ = parse_ontology(_read_lines(path))
    test_onto = normalize(axioms)
    tests = []
    for ax in test_onto.axioms:
        if not isinstance(ax, NF1):
            continue
        name_c = test_onto.class_name(ax.c)
        name_d = test_onto.class_name(ax.d)
        for name in (name_c, name_d):
            if name not in name_to_id:
                raise _CliError(
                    f"test class {name!r} has no embedding in the model"
                )
        tests.append(NF1(name_to_id[name_c], name_to_id[name_d]))
    if not tests:
        raise _CliError(f"no subclass test axioms found in {path}")
    return tests


def _load_known(path: str, name_to_id: dict) -> list:
    axioms, _ = parse_ontology(_read_lines(path))
    known_onto = normalize(axioms)
    known = []
    for ax in known_onto.axioms:
        if not isinstance(ax, NF1):
            continue
        name_c = known_onto.class_name(ax.c)
        name_d = known_onto.class_name(ax.d)
        if name_c in name_to_id and name_d in name_to_id:
            known.append(NF1(name_to_id[name_c], name_to_id[name_d]))
    return known


def cmd_eval(args) -> int:
    _check_distinct(
        [args.model_in, args.test_file, args.filtered],
        [args.report_out, f"{args.report_out}.ranks"],
    )
    direction = args.direction or "sub"
    if direction not in ranking.DIRECTIONS:
        raise _CliError("--direction must be sub or sup")
    with open(args.model_in, "r", encoding="utf-8") as fh:
        header = fh.readline()
    if header.startswith(baselines.BASELINE_HEADER_PREFIX):
        saved = baselines.load_baseline(args.model_in)
        name_to_id = {name: i for i, name in enumerate(saved.entity_names)}
        tests = _load_tests(args.test_file, name_to_id)
        known = _load_known(args.filtered, name_to_id) if args.filtered else None
        candidates = ranking.eligible_candidates(saved.entity_names)
        try:
            sub_rel = saved.relation_names.index(baselines.SUBCLASS_RELATION)
        except ValueError:
            raise _CliError(
                f"baseline file lacks the {baselines.SUBCLASS_RELATION} relation"
            ) from None
        report = ranking.baseline_evaluate(
            tests, saved.state, candidates, direction=direction,
            filter_known=known, sub_relation=sub_rel,
        )
    elif header.startswith(gm.MODEL_HEADER_PREFIX):
        saved = gm.load_model(args.model_in)
        name_to_id = {name: i for i, name in enumerate(saved.class_names)}
        tests = _load_tests(args.test_file, name_to_id)
        known = _load_known(args.filtered, name_to_id) if args.filtered else None
        candidates = ranking.eligible_candidates(saved.class_names)
        report = ranking.evaluate(
            tests, saved.state, candidates, direction=direction,
            adjust_radius=args.radius_adjusted, filter_known=known,
        )
    else:
        raise _CliError(f"{args.model_in}: not a geodl model or baseline file")
    ranking.write_report(args.report_out, report)
    print(f"wrote {args.report_out} ({len(report.ranks)} tests, "
          f"{report.candidate_count} candidates)")
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="geodl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="axiom/class/relation counts for a file")
    p.add_argument("input")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("normalize", help="rewrite axioms into normal forms")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("split", help="hold out subclass pairs for valid/test")
    p.add_argument("input")
    p.add_argument("out_dir")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--fractions", default=None, metavar="a,b,c")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("train", help="learn embeddings from a training file")
    p.add_argument("train_file")
    p.add_argument("model_out")
    p.add_argument("log_out", nargs="?", default=None)
    p.add_argument("--variant", default=None, help="emel or emel-var")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--model", default=None,
                   help="train a baseline instead: transe, transh or distmult")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="rank held-out subclass pairs")
    p.add_argument("model_in")
    p.add_argument("test_file")
    p.add_argument("report_out")
    p.add_argument("--direction", default=None, help="sub (default) or sup")
    p.add_argument("--filtered", default=None, metavar="KNOWN_EL",
                   help="drop other known subclasses of the source class")
    p.add_argument("--radius-adjusted", action="store_true",
                   help="add radius slack to the candidate distance")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Optional[list] = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        return args.func(args)
    except _CliError as exc:
        print(f"geodl: error: {exc}", file=sys.stderr)
        return 1
    except ParseError as exc:
        print(f"geodl: parse error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"geodl: numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"geodl: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
