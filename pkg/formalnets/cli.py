"""Command-line front end for the formal networks workbench."""

from __future__ import annotations

import argparse
import json
import logging
from pathlib import Path
import sys
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from formalnets.config import Config, load_config
from formalnets.exceptions import WorkbenchError
from formalnets.services import analysis, codec
from formalnets.services.machines import normalize_tm, tm_trace
from formalnets.services.neural_gpu import compile_rnn_to_ngpu, ngpu_run
from formalnets.services.pipeline import VerificationPipeline
from formalnets.services.rnn_compiler import compile_rnn
from formalnets.services.tm_compiler import TMVectorLayout, compile_tm
from formalnets.services.transformer import Recognizer
from formalnets.utils import format_rational, format_row

logger = logging.getLogger("formalnets")

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_ERROR = 2


def split_word(text: str) -> List[str]:
    """Whitespace-separated symbols, or one character per symbol."""
    text = text.strip()
    return text.split() if any(ch.isspace() for ch in text) else list(text)


def read_inputs(path: str) -> List[List[str]]:
    words = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip() and not line.lstrip().startswith("#"):
            words.append(split_word(line))
    return words


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        Path(output).write_text(text + "\n", encoding="utf-8")
        logger.info("wrote %s", output)
    else:
        print(text)


def _print_frame(frame: pd.DataFrame, tsv: bool) -> None:
    if tsv:
        sys.stdout.write(frame.to_csv(sep="\t", index=False))
    else:
        print(frame.to_string(index=False))


def _vector_text(values: np.ndarray) -> str:
    return "[" + ", ".join(format_row(values)) + "]"


def _is_rnn_document(text: str) -> bool:
    data = json.loads(text)
    return isinstance(data, dict) and "d" in data


# compile commands


def cmd_compile_tm(args: argparse.Namespace, config: Config) -> int:
    tm = codec.parse_tm_spec(Path(args.spec).read_text(encoding="utf-8"))
    rec = compile_tm(tm)
    if args.layout:
        _print_frame(TMVectorLayout.for_machine(tm).frame(tm), tsv=True)
        if not args.output:
            return EXIT_OK
    _emit(codec.dump_document(codec.recognizer_to_document(rec)), args.output)
    return EXIT_OK


def cmd_compile_rnn(args: argparse.Namespace, config: Config) -> int:
    rnn = codec.parse_rnn_spec(Path(args.spec).read_text(encoding="utf-8"))
    _emit(codec.dump_document(codec.recognizer_to_document(compile_rnn(rnn))), args.output)
    return EXIT_OK


def cmd_compile_ngpu(args: argparse.Namespace, config: Config) -> int:
    rnn = codec.parse_rnn_spec(Path(args.spec).read_text(encoding="utf-8"))
    params, lifter = compile_rnn_to_ngpu(rnn)
    embed = {symbol: lifter(vector) for symbol, vector in rnn.embed.items()}
    _emit(codec.dump_document(codec.ngpu_to_document(params, embed, lifter.blocks())), args.output)
    return EXIT_OK


# run


def _run_recognizer(rec: Recognizer, word: List[str], steps: int, args: argparse.Namespace) -> int:
    names = list(rec.slots) if rec.slots else [f"y[{k}]" for k in range(rec.dim)]
    run = rec.decoder(word)
    y = rec.seed
    rows: List[Dict[str, object]] = []
    accepted: Optional[int] = None
    for step in range(1, steps + 1):
        y = run.push(y)
        record = run.records[-1]
        hit = rec.final_pred.holds(y)
        if hit and accepted is None:
            accepted = step
        if args.tsv:
            row: Dict[str, object] = {"step": step, "accepts": hit}
            row.update(zip(names, format_row(y)))
            rows.append(row)
            continue
        print(f"y_{step} = {_vector_text(y)}{'  accept' if hit else ''}")
        if args.trace:
            for index, layer in enumerate(record.layers, start=1):
                nonzero = ", ".join(
                    f"{names[slot]}={format_rational(value)}" for slot, value in enumerate(layer.output) if value != 0
                )
                print(f"  layer {index}: self={list(layer.self_support)} cross={list(layer.cross_support)} {nonzero}")
    if args.tsv:
        _print_frame(pd.DataFrame(rows, columns=["step", "accepts"] + names), tsv=True)
    else:
        print("undecided" if accepted is None else f"accept({accepted})")
    return EXIT_OK


def cmd_run(args: argparse.Namespace, config: Config) -> int:
    network = codec.load_network(Path(args.network).read_text(encoding="utf-8"))
    word = split_word(args.input)
    steps = config.DEFAULT_STEPS if args.steps is None else args.steps
    if isinstance(network, Recognizer):
        return _run_recognizer(network, word, steps, args)
    params, embed = network
    missing = [symbol for symbol in word if symbol not in embed]
    if missing:
        raise WorkbenchError(f"symbols {missing} have no embedding in the Neural GPU document")
    outputs = ngpu_run([embed[symbol] for symbol in word], steps, params)
    if args.tsv:
        frame = pd.DataFrame([format_row(y) for y in outputs], columns=[f"y[{k}]" for k in range(params.dim)])
        frame.insert(0, "step", range(1, len(outputs) + 1))
        _print_frame(frame, tsv=True)
    else:
        for step, y in enumerate(outputs, start=1):
            print(f"y_{step} = {_vector_text(y)}")
    return EXIT_OK


# verify, trace, normalize


def cmd_verify(args: argparse.Namespace, config: Config) -> int:
    text = Path(args.spec).read_text(encoding="utf-8")
    inputs = read_inputs(args.inputs)
    steps = config.DEFAULT_STEPS if args.steps is None else args.steps
    pipeline = VerificationPipeline(config)
    if _is_rnn_document(text):
        report = pipeline.verify_rnn(codec.parse_rnn_spec(text), inputs, steps)
    else:
        report = pipeline.verify_tm(normalize_tm(codec.parse_general_tm_spec(text)), inputs, steps)
    print(report.model_dump_json(indent=2, exclude_none=True))
    for case in report.cases:
        if case.divergence is not None:
            d = case.divergence
            where = d.name or d.block or "-"
            print(
                f"FAIL {case.input!r}: step {d.step}, {d.stage}, {where}: expected {d.expected}, got {d.got}",
                file=sys.stderr,
            )
    print(report.status, file=sys.stderr)
    return EXIT_OK if report.status == "PASS" else EXIT_FAIL


def cmd_trace(args: argparse.Namespace, config: Config) -> int:
    tm = normalize_tm(codec.parse_general_tm_spec(Path(args.spec).read_text(encoding="utf-8")))
    steps = config.DEFAULT_STEPS if args.steps is None else args.steps
    trace = tm_trace(tm, split_word(args.input), steps)
    _print_frame(trace.frame(), args.tsv)
    if not args.tsv:
        print("undecided" if trace.accept_time is None else f"accept({trace.accept_time})")
    return EXIT_OK


def cmd_normalize(args: argparse.Namespace, config: Config) -> int:
    tm = normalize_tm(codec.parse_general_tm_spec(Path(args.spec).read_text(encoding="utf-8")))
    _emit(codec.dump_document(codec.machine_to_document(tm)), args.output)
    return EXIT_OK


def cmd_propinv(args: argparse.Namespace, config: Config) -> int:
    if args.net:
        rec = codec.load_network(Path(args.net).read_text(encoding="utf-8"))
        if not isinstance(rec, Recognizer):
            raise WorkbenchError("propinv needs a Transformer network document")
    else:
        rec = analysis.majority_recognizer()
    word = split_word(args.word)
    seed = config.SAMPLE_SEED if args.seed is None else args.seed
    steps = config.DEFAULT_STEPS if args.steps is None else args.steps
    members = analysis.propinv_samples(word, args.max_len, args.count, seed=seed, cap=config.PERMUTATION_CAP)
    frame = analysis.invariance_report(rec, word, members, steps)
    _print_frame(frame, args.tsv)
    return EXIT_OK if bool(frame["agrees"].all()) else EXIT_FAIL


COMMANDS: Dict[str, Callable[[argparse.Namespace, Config], int]] = {
    "compile-tm": cmd_compile_tm,
    "compile-rnn": cmd_compile_rnn,
    "compile-ngpu": cmd_compile_ngpu,
    "run": cmd_run,
    "verify": cmd_verify,
    "trace": cmd_trace,
    "normalize": cmd_normalize,
    "propinv": cmd_propinv,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="formalnets", description="Exact Transformer and Neural GPU workbench.")
    parser.add_argument("--log-level", help="override FORMALNETS_LOG_LEVEL")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile-tm", help="compile a normalized Turing machine into a Transformer")
    p.add_argument("spec")
    p.add_argument("-o", "--output")
    p.add_argument("--layout", action="store_true", help="print the slot table as TSV")

    for name, what in (("compile-rnn", "a Transformer"), ("compile-ngpu", "a Neural GPU")):
        p = sub.add_parser(name, help=f"compile an RNN encoder-decoder into {what}")
        p.add_argument("spec")
        p.add_argument("-o", "--output")

    p = sub.add_parser("run", help="run a network document on one input")
    p.add_argument("network")
    p.add_argument("--input", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--trace", action="store_true", help="print per-layer outputs")
    p.add_argument("--tsv", action="store_true")

    p = sub.add_parser("verify", help="diff a compiled network against its reference model")
    p.add_argument("spec")
    p.add_argument("--inputs", required=True, help="file with one input word per line")
    p.add_argument("--steps", type=int)

    p = sub.add_parser("trace", help="reference trace of a Turing machine")
    p.add_argument("spec")
    p.add_argument("--input", required=True)
    p.add_argument("--steps", type=int)
    p.add_argument("--tsv", action="store_true")

    p = sub.add_parser("normalize", help="rewrite a general Turing machine in normal form")
    p.add_argument("spec")
    p.add_argument("-o", "--output")

    p = sub.add_parser("propinv", help="check output agreement over a proportion class")
    p.add_argument("--word", required=True)
    p.add_argument("--net")
    p.add_argument("--max-len", type=int, default=8)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--tsv", action="store_true")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = load_config()
    if args.log_level:
        config.LOG_LEVEL = args.log_level
    logging.basicConfig(level=config.LOG_LEVEL.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args, config)
    except (WorkbenchError, OSError, json.JSONDecodeError) as exc:
        logger.error("%s: %s", args.command, exc)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except Exception:  # pylint: disable=broad-except
        logger.exception("%s failed", args.command)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
