import pytest

from spoofsim.bus import Node, NodeSchedule, SimClock, SimCore, Stage, WriterClass


class Recorder(Node):
    """Test node that logs its activations and optionally publishes."""

    def __init__(self, node_id, rate_hz, stage=Stage.SENSOR, phase=0,
                 writer_class=WriterClass.GENUINE, topic=None, make=None):
        self.schedule = NodeSchedule(node_id, rate_hz, phase, writer_class)
        self.stage = stage
        self.topic = topic
        self.make = make
        self.ticks = []

    def on_tick(self, sim, tick):
        self.ticks.append(tick)
        if self.topic is not None:
            sim.publish(self.node_id, self.topic, self.make(tick))


@pytest.fixture
def sim():
    return SimCore(SimClock())


# criterion number -> (title, passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n} {'PASS' if ok else 'FAIL'}: {title} ({detail})")
