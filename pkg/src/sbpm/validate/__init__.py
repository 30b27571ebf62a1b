"""Model validation: structural checks, interface consistency, and bounded
behavioral soundness, with a machine-readable combined report."""

from __future__ import annotations

from dataclasses import dataclass

from sbpm.model import ProcessModel
from sbpm.validate.checks import check_interfaces, check_structure
from sbpm.validate.diagnostics import (
    ERROR,
    INFO,
    V_SKIP_01,
    V_SKIP_02,
    V_SOUND_01,
    WARNING,
    Diagnostic,
    has_errors,
)
from sbpm.validate.soundness import (
    INCONCLUSIVE,
    SOUND,
    UNSOUND,
    ChooseStep,
    ConsumeStep,
    GlobalStep,
    PoolItem,
    ProductState,
    SendStep,
    SoundnessReport,
    TimeoutStep,
    check_soundness,
    replay_counterexample,
)


@dataclass(frozen=True)
class ValidateOptions:
    pool_bound: int = 1
    state_cap: int = 1_000_000
    skip_soundness: bool = False


def validate(m: ProcessModel, opts: ValidateOptions = ValidateOptions()) -> tuple[list[Diagnostic], SoundnessReport]:
    """All checks combined; soundness is skipped when static errors exist."""
    diagnostics = check_structure(m) + check_interfaces(m)

    if has_errors(diagnostics) or opts.skip_soundness:
        diagnostics.append(
            Diagnostic(INFO, V_SKIP_01, ("sid.xml", m.id),
                       "soundness not checked: static errors present" if has_errors(diagnostics)
                       else "soundness not checked: disabled")
        )
        report = SoundnessReport(verdict=INCONCLUSIVE, explored=0, counterexample=None,
                                 cap_hit=False, bound=opts.pool_bound)
        return diagnostics, report

    if any(s.external for s in m.subjects):
        diagnostics.append(
            Diagnostic(INFO, V_SKIP_02, ("sid.xml", m.id),
                       "soundness not checked: model declares external subjects")
        )
        report = SoundnessReport(verdict=INCONCLUSIVE, explored=0, counterexample=None,
                                 cap_hit=False, bound=opts.pool_bound)
        return diagnostics, report

    report = check_soundness(m, pool_bound=opts.pool_bound, state_cap=opts.state_cap)
    diagnostics.extend(report.warnings)
    if report.verdict == UNSOUND:
        steps = len(report.counterexample or ())
        diagnostics.append(
            Diagnostic(ERROR, V_SOUND_01, ("sid.xml", m.id),
                       f"reachable deadlock after {steps} step(s); see counterexample")
        )
    return diagnostics, report


def report_to_json(diagnostics, report: SoundnessReport) -> dict:
    return {
        "diagnostics": [d.to_json() for d in diagnostics],
        "soundness": report.to_json(),
    }


__all__ = [
    "ERROR",
    "INCONCLUSIVE",
    "INFO",
    "SOUND",
    "UNSOUND",
    "WARNING",
    "ChooseStep",
    "ConsumeStep",
    "Diagnostic",
    "GlobalStep",
    "PoolItem",
    "ProductState",
    "SendStep",
    "SoundnessReport",
    "TimeoutStep",
    "ValidateOptions",
    "check_interfaces",
    "check_soundness",
    "check_structure",
    "has_errors",
    "replay_counterexample",
    "report_to_json",
    "validate",
]
