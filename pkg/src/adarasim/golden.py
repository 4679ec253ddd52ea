"""The ten-router worked example: three sources asking for the same destination.

Sources S, A and B look for D.  S starts first; A and B start a little
later, so their requests meet S's pending request at m, o and r and get
aggregated there.  Links are static, jitter is off and every hop takes
exactly one millisecond, so the run is fully scripted.
"""

from __future__ import annotations

from .scenario import Scenario

NAMES = ("S", "A", "B", "m", "n", "o", "p", "q", "r", "D")
ID = {name: i for i, name in enumerate(NAMES)}

LINKS = (
    ("S", "m"),
    ("m", "B"),
    ("m", "n"),
    ("m", "o"),
    ("n", "o"),
    ("n", "p"),
    ("o", "r"),
    ("o", "q"),
    ("p", "q"),
    ("r", "A"),
    ("q", "D"),
)

T1 = 0.0
# A and B start after S, early enough that r hears A before S's request
# reaches it through o
T2 = 0.0015


def golden_scenario(engine: str = "adara") -> Scenario:
    return Scenario(
        engine=engine,
        topology="graph",
        node_count=len(NAMES),
        flows=0,
        jitter=0.0,
        prop_delay=0.001,
        # hellos would hand out neighbor routes before discovery starts
        hello_start=0.5,
        duration=0.25,
        monitor_interval=0.01,
        links=[(ID[a], ID[b]) for a, b in LINKS],
        sends=[(T1, ID["S"], ID["D"]), (T2, ID["A"], ID["D"]), (T2, ID["B"], ID["D"])],
    )


def name(node: int) -> str:
    return NAMES[node]
