"""Subject-oriented process compiler and distributed actor runtime.

Pipeline: parse SID/SBD model files -> validate (structure, interfaces,
bounded soundness) -> compile into a deployable bundle of per-subject FSM
programs -> execute instances as supervised, message-exchanging actors on
one or more engine nodes, with humans acting through the task/worklist API.
"""

__version__ = "0.1.0"

from sbpm import compiler, engine, model, runtime, validate

__all__ = ["compiler", "engine", "model", "runtime", "validate", "__version__"]
