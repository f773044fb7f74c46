"""Step-by-step verification of compiled networks against their reference models."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
import logging
from typing import Callable, List, Optional, Sequence

import numpy as np

from formalnets.config import Config, load_config
from formalnets.exceptions import AuditError, GatingError
from formalnets.models import CaseReport, Divergence, VerifyReport
from formalnets.services import neural_gpu, rnn_compiler, tm_compiler
from formalnets.services.machines import RnnEncDec, TuringMachine, rnn_accepts, rnn_run, tm_trace
from formalnets.services.transformer import Recognizer
from formalnets.utils import format_rational

logger = logging.getLogger(__name__)

Word = Sequence[str]


def first_mismatch(expected: np.ndarray, got: np.ndarray) -> Optional[int]:
    """Index of the first differing coordinate, or None."""
    if expected.shape != got.shape:
        return 0
    differing = np.flatnonzero(expected != got)
    return int(differing[0]) if differing.size else None


def _vector_divergence(
    step: int,
    stage: str,
    expected: np.ndarray,
    got: np.ndarray,
    names: Optional[Sequence[str]],
    block_of: Callable[[int], str],
) -> Optional[Divergence]:
    slot = first_mismatch(expected, got)
    if slot is None:
        return None
    return Divergence(
        step=step,
        stage=stage,
        slot=slot,
        name=names[slot] if names else None,
        block=block_of(slot),
        expected=format_rational(expected[slot]),
        got=format_rational(got[slot]),
    )


def _accept_text(step: Optional[int]) -> str:
    return "undecided" if step is None else f"accept({step})"


def _audit(net_values: Sequence[np.ndarray], what: str) -> None:
    outside = tm_compiler.audit_values(net_values)
    if outside:
        raise AuditError(f"{what} saw {format_rational(outside[0])} outside {{0, 1/2, 1}}")


class VerificationPipeline:
    """Compiles, runs and diffs networks against reference interpreters."""

    def __init__(self, config: Config | None = None) -> None:
        self._config = config or load_config()
        self._steps: list[str] = []

    def _fan_out(self, check: Callable[[Word], CaseReport], inputs: Sequence[Word]) -> List[CaseReport]:
        workers = max(1, min(self._config.VERIFY_WORKERS, len(inputs)))
        with ThreadPoolExecutor(max_workers=workers) as executor:
            return list(executor.map(check, inputs))

    def _vacuous(self, inputs: Sequence[Word]) -> VerifyReport:
        message = "steps=0: nothing was checked"
        logger.warning(message)
        self._steps.append("vacuous")
        cases = [CaseReport(input="".join(word), steps_checked=0) for word in inputs]
        return VerifyReport(status="PASS", cases=cases, warnings=[message], pipeline_steps=self.summary())

    def _report(self, cases: List[CaseReport], kind: str) -> VerifyReport:
        for case in cases:
            if case.passed:
                logger.info("%s %r: PASS over %d steps", kind, case.input, case.steps_checked)
            else:
                logger.warning("%s %r: FAIL %s", kind, case.input, case.divergence)
        status = "PASS" if all(case.passed for case in cases) else "FAIL"
        self._steps.append(f"{kind}:{status}")
        return VerifyReport(status=status, cases=cases, pipeline_steps=self.summary())

    # Turing machines

    def verify_tm(
        self,
        tm: TuringMachine,
        inputs: Sequence[Word],
        steps: int,
        recognizer: Recognizer | None = None,
    ) -> VerifyReport:
        """Diff the compiled network against the machine's trace, step by step.

        Passing ``recognizer`` checks that network instead of a fresh
        compilation of ``tm``.
        """
        if steps <= 0:
            return self._vacuous(inputs)
        if recognizer is None:
            recognizer = tm_compiler.compile_tm(tm)
            self._steps.append("compile_tm")
        else:
            self._steps.append("use_supplied_network")
        layout = tm_compiler.TMVectorLayout.for_machine(tm)
        audit = self._config.AUDIT

        def check(word: Word) -> CaseReport:
            return _check_tm_case(tm, recognizer, layout, word, steps, audit)

        cases = self._fan_out(check, inputs)
        self._steps.append(f"verify_tm:{len(cases)}")
        return self._report(cases, "tm")

    # RNNs

    def verify_rnn(self, rnn: RnnEncDec, inputs: Sequence[Word], steps: int) -> VerifyReport:
        """Check the Transformer and Neural GPU compilations of ``rnn`` against rnn_run."""
        if steps <= 0:
            return self._vacuous(inputs)
        recognizer = rnn_compiler.compile_rnn(rnn)
        self._steps.append("compile_rnn")
        ngpu, lifter = neural_gpu.compile_rnn_to_ngpu(rnn)
        self._steps.append("compile_ngpu")
        layout = rnn_compiler.RnnVectorLayout(rnn.dim)

        def check(word: Word) -> CaseReport:
            case = _check_rnn_transformer(rnn, recognizer, layout, word, steps)
            if case.divergence is not None:
                return case
            divergence = _check_ngpu(rnn, ngpu, lifter, word, steps)
            return case.model_copy(update={"divergence": divergence})

        cases = self._fan_out(check, inputs)
        self._steps.append(f"verify_rnn:{len(cases)}")
        return self._report(cases, "rnn")

    def summary(self) -> list[str]:
        """Return the steps executed so far."""
        return self._steps.copy()


def _check_tm_case(
    tm: TuringMachine,
    rec: Recognizer,
    layout: tm_compiler.TMVectorLayout,
    word: Word,
    steps: int,
    audit: bool,
) -> CaseReport:
    trace = tm_trace(tm, word, steps)
    limit = trace.length - 1
    names = rec.slots
    run = rec.decoder(word)
    y = rec.seed
    network_accept: Optional[int] = None
    transition_layer = rec.params.dec_layers[0]

    def diverged(divergence: Divergence, checked: int) -> CaseReport:
        return CaseReport(
            input="".join(word),
            steps_checked=checked,
            reference_accept=trace.accept_time,
            network_accept=network_accept,
            divergence=divergence,
        )

    for t in range(1, limit + 1):
        y = run.push(y)
        first, second, third = run.records[-1].layers[:3]

        expected = tm_compiler.expected_first_layer(tm, trace, word, t - 1)
        divergence = _vector_divergence(t, "layer1", expected, first.output, names, layout.block_of)
        if divergence is not None:
            return diverged(divergence, t)

        if second.self_support != tuple(range(t)):
            tied = Divergence(step=t, stage="layer2", expected=f"all of 0..{t - 1}", got=str(list(second.self_support)))
            return diverged(tied, t)

        if third.self_support != (trace.last_visit[t],):
            pointer = Divergence(
                step=t, stage="layer3", expected=str(trace.last_visit[t]), got=str(list(third.self_support))
            )
            return diverged(pointer, t)

        if audit:
            try:
                _audit(tm_compiler.sigma_stage_outputs(transition_layer.O, first.attended), "transition network")
                _audit(tm_compiler.sigma_stage_outputs(rec.params.final_F, third.output), "output network")
            except AuditError as exc:
                return diverged(Divergence(step=t, stage="audit", expected="{0, 1/2, 1}", got=str(exc)), t)

        divergence = _vector_divergence(
            t, "output", tm_compiler.expected_output(tm, trace, t), y, names, layout.block_of
        )
        if divergence is not None:
            return diverged(divergence, t)

        if network_accept is None and rec.final_pred.holds(y):
            network_accept = t

    case = CaseReport(
        input="".join(word),
        steps_checked=limit,
        reference_accept=trace.accept_time,
        network_accept=network_accept,
    )
    if network_accept != trace.accept_time:
        mismatch = Divergence(
            step=limit,
            stage="accept",
            expected=_accept_text(trace.accept_time),
            got=_accept_text(network_accept),
        )
        return case.model_copy(update={"divergence": mismatch})
    return case


def _check_rnn_transformer(
    rnn: RnnEncDec,
    rec: Recognizer,
    layout: rnn_compiler.RnnVectorLayout,
    word: Word,
    steps: int,
) -> CaseReport:
    X = rnn.embed_word(word)
    n = len(X)
    ref = rnn_compiler.reference_sequences(rnn, X, steps + 1)
    decoded = rnn_run(rnn, X, max(0, steps - n - 1)).decoded
    reference = rnn_accepts(rnn, X, max_steps=steps)
    names = rec.slots
    run = rec.decoder(word)
    y = rec.seed
    network_accept: Optional[int] = None

    def diverged(divergence: Divergence, checked: int) -> CaseReport:
        return CaseReport(
            input="".join(word),
            steps_checked=checked,
            reference_accept=reference.step,
            network_accept=network_accept,
            divergence=divergence,
        )

    for i in range(steps + 1):
        for block in (ref.beta[i], ref.gamma[i]):
            if not bool(np.all((block >= 0) & (block <= 1))):
                return diverged(Divergence(step=i, stage="gate", expected="[0, 1]", got=str(list(block))), i)
    for t in range(1, steps + 1):
        y = run.push(y)
        first = run.records[-1].layers[0]
        expected = rnn_compiler.expected_first_layer(layout, ref, t - 1)
        divergence = _vector_divergence(t, "layer1", expected, first.output, names, layout.block_of)
        if divergence is not None:
            return diverged(divergence, t)
        expected = rnn_compiler.expected_output(layout, ref, t)
        divergence = _vector_divergence(t, "output", expected, y, names, layout.block_of)
        if divergence is not None:
            return diverged(divergence, t)
        if t >= n + 1:
            g = decoded[t - n - 1]
            gamma = y[layout.block(3)]
            slot = first_mismatch(g, gamma)
            if slot is not None:
                state = Divergence(
                    step=t,
                    stage="decoder_state",
                    slot=layout.block(3).start + slot,
                    block="gamma",
                    expected=format_rational(g[slot]),
                    got=format_rational(gamma[slot]),
                )
                return diverged(state, t)
        if network_accept is None and rec.final_pred.holds(y):
            network_accept = t

    case = CaseReport(
        input="".join(word),
        steps_checked=steps,
        reference_accept=reference.step,
        network_accept=network_accept,
    )
    if network_accept != reference.step:
        mismatch = Divergence(
            step=steps, stage="accept", expected=_accept_text(reference.step), got=_accept_text(network_accept)
        )
        return case.model_copy(update={"divergence": mismatch})
    return case


def _check_ngpu(
    rnn: RnnEncDec,
    params: neural_gpu.NGPUParams,
    lifter: neural_gpu.InputLifter,
    word: Word,
    steps: int,
) -> Optional[Divergence]:
    """Row invariant of the compiled Neural GPU at every iterate up to ``steps``."""
    X = rnn.embed_word(word)
    S0 = neural_gpu.initial_state([lifter(x) for x in X], params.width, params.dim)
    try:
        iterates = neural_gpu.ngpu_iterates(S0, steps, params)
    except GatingError as exc:
        return Divergence(step=0, stage="ngpu_gate", expected="[0, 1]", got=str(exc))
    block_names = {index: name for name, (start, stop) in lifter.blocks().items() for index in range(start, stop)}
    for t, S in enumerate(iterates):
        for row, expected in enumerate(neural_gpu.expected_ngpu_rows(rnn, X, t), start=1):
            divergence = _vector_divergence(t, f"ngpu_row{row}", expected, S[row - 1, 0], None, block_names.__getitem__)
            if divergence is not None:
                return divergence
    return None
