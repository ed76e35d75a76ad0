"""Injectable wall clock.

All timestamps in the system are UTC whole milliseconds. Components
never call ``time.time()`` directly so tests can drive idle-timeout and
lifecycle timing deterministically.
"""

import time


class Clock:
    def now_ms(self) -> int:
        raise NotImplementedError


class SystemClock(Clock):
    def now_ms(self) -> int:
        return time.time_ns() // 1_000_000


class ManualClock(Clock):
    """Test clock advanced explicitly."""

    def __init__(self, start_ms: int = 1_600_000_000_000):
        self._now = start_ms

    def now_ms(self) -> int:
        return self._now

    def advance(self, ms: int) -> int:
        self._now += ms
        return self._now

    def set(self, ms: int) -> int:
        self._now = ms
        return self._now
