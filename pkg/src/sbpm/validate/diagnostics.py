"""Diagnostic records with a stable public code catalog.

Codes are contract: tests and tooling match on them, never on message text.
"""

from __future__ import annotations

from dataclasses import dataclass

ERROR = "error"
WARNING = "warning"
INFO = "info"

# Structural checks
V_STRUCT_01 = "V-STRUCT-01"  # state unreachable from start
V_STRUCT_02 = "V-STRUCT-02"  # no end state reachable from here (warning)
V_STRUCT_03 = "V-STRUCT-03"  # duplicate outcome label
V_STRUCT_04 = "V-STRUCT-04"  # end state with outgoing transition
# Interface checks
V_IFACE_01 = "V-IFACE-01"  # send transition contradicts the declared direction
V_IFACE_02 = "V-IFACE-02"  # receive transition contradicts the declared direction
V_IFACE_03 = "V-IFACE-03"  # declared message never sent (warning)
V_IFACE_04 = "V-IFACE-04"  # sent message never received anywhere (warning)
# Soundness
V_SOUND_01 = "V-SOUND-01"  # reachable deadlock
V_SOUND_02 = "V-SOUND-02"  # subject can halt with unconsumed messages (warning)
# Skips
V_SKIP_01 = "V-SKIP-01"  # soundness skipped: static errors present
V_SKIP_02 = "V-SKIP-02"  # soundness skipped: external subjects

CATALOG = frozenset(
    {
        V_STRUCT_01,
        V_STRUCT_02,
        V_STRUCT_03,
        V_STRUCT_04,
        V_IFACE_01,
        V_IFACE_02,
        V_IFACE_03,
        V_IFACE_04,
        V_SOUND_01,
        V_SOUND_02,
        V_SKIP_01,
        V_SKIP_02,
    }
)


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    location: tuple[str, str]  # (file, element id)
    message: str

    def to_json(self) -> dict:
        return {
            "severity": self.severity,
            "code": self.code,
            "location": {"file": self.location[0], "element": self.location[1]},
            "message": self.message,
        }


def has_errors(diagnostics) -> bool:
    return any(d.severity == ERROR for d in diagnostics)
