"""Per-subject compilation and bundle linking."""

from __future__ import annotations

from sbpm.compiler.bundle import Bundle, Manifest, compute_content_hash
from sbpm.compiler.errors import ExternalSubjectHasNoBehavior, UnknownSubject
from sbpm.compiler.ir import (
    EmitArm,
    IrArm,
    IrState,
    MatchArm,
    OutcomeArm,
    RestartPolicy,
    SubjectProgram,
    SupervisorConfig,
    TimeoutArm,
)
from sbpm.model import (
    FunctionLabel,
    ProcessModel,
    ReceiveLabel,
    SendLabel,
    TimeoutLabel,
)

FIXED_EPOCH = "1970-01-01T00:00:00Z"


def compile_subject(m: ProcessModel, subject_id: str) -> SubjectProgram:
    """Lower one behavior graph into an indexed FSM table."""
    try:
        decl = m.subject_by_id(subject_id)
    except KeyError:
        raise UnknownSubject(subject_id) from None
    if decl.external:
        raise ExternalSubjectHasNoBehavior(subject_id)
    graph = m.behaviors[subject_id]

    index_of = {s.id: i for i, s in enumerate(graph.states)}
    ir_states: list[IrState] = []
    for s in graph.states:
        arms: list[IrArm] = []
        timeout_arm: TimeoutArm | None = None
        for t in graph.outgoing(s.id):
            target = index_of[t.to_state]
            label = t.label
            if isinstance(label, FunctionLabel):
                arms.append(OutcomeArm(outcome=label.outcome, target=target))
            elif isinstance(label, SendLabel):
                bo = m.message_by_id(label.message).bo
                arms.append(EmitArm(message=label.message, to_subject=label.to_subject, bo=bo, target=target))
            elif isinstance(label, ReceiveLabel):
                arms.append(MatchArm(message=label.message, from_subject=label.from_subject, target=target))
            elif isinstance(label, TimeoutLabel):
                timeout_arm = TimeoutArm(target=target)
        if timeout_arm is not None:
            arms.append(timeout_arm)
        ir_states.append(
            IrState(
                id=s.id,
                name=s.name,
                kind=s.kind,
                arms=tuple(arms),
                refinement=s.refinement,
                on_error=s.on_error,
                timeout_ms=s.timeout_ms,
            )
        )

    start_index = index_of[graph.start_state.id]
    end_indices = frozenset(i for i, s in enumerate(graph.states) if s.end)
    return SubjectProgram(
        subject=subject_id,
        states=tuple(ir_states),
        start_index=start_index,
        end_indices=end_indices,
    )


def default_supervisor_config(m: ProcessModel) -> SupervisorConfig:
    return SupervisorConfig(
        restart_policy=RestartPolicy.replay(),
        metrics=("instance_duration", "per_subject_wait_time"),
        external_routes=tuple((s.id, "") for s in m.external_subjects()),
    )


def link_bundle(
    m: ProcessModel,
    template: SupervisorConfig | None = None,
    *,
    created_at: str = FIXED_EPOCH,
) -> Bundle:
    """Compile every internal subject and link the deployable bundle.

    Byte-deterministic: programs sorted by subject id, created_at pinned to a
    fixed epoch unless the caller stamps a real time in.
    """
    supervisor = template if template is not None else default_supervisor_config(m)
    routes = {subject: hint for subject, hint in supervisor.external_routes}
    for s in m.external_subjects():
        routes.setdefault(s.id, "")
    supervisor = SupervisorConfig(
        restart_policy=supervisor.restart_policy,
        metrics=supervisor.metrics,
        external_routes=tuple(sorted(routes.items())),
    )

    programs = tuple(compile_subject(m, s.id) for s in sorted(m.internal_subjects(), key=lambda s: s.id))
    pool_capacities = tuple(sorted((s.id, s.pool_capacity) for s in m.subjects))
    roles = tuple(sorted((s.id, s.role) for s in m.internal_subjects()))
    bundle = Bundle(
        manifest=Manifest(
            process_id=m.id,
            name=m.name,
            version=m.version,
            created_at=created_at,
            content_hash="",
        ),
        programs=programs,
        messages=m.messages,
        bo_schemas=m.bo_schemas,
        supervisor=supervisor,
        pool_capacities=pool_capacities,
        roles=roles,
    )
    return bundle.with_hash(compute_content_hash(bundle))
