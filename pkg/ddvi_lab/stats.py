# -*- coding: utf-8 -*-
import math
import os
from collections import namedtuple

from scrapy.settings import BaseSettings
from scrapy.statscollectors import StatsCollector

from .defaults import METRICS_LOG_NAME

METRICS_COLUMNS = ("step", "rec", "reg", "diff", "total", "wallclock_ms")

# StatsCollector only reads ``settings`` from the crawler it is built with.
StatsHost = namedtuple("StatsHost", ["settings"])


def _format(value):
    if isinstance(value, int):
        return "%d" % value
    return repr(float(value))


class MetricsLog(StatsCollector):
    """
    Training metrics: Scrapy stats counters plus the tab-separated log file

    Settings
    --------
    STATS_DUMP : bool (default: False)
        Passed through to the collector; the trainer logs its own summary.
    """

    def __init__(self, path=None, log_wallclock=True, settings=None):
        if settings is None:
            settings = BaseSettings({"STATS_DUMP": False})
        super().__init__(StatsHost(settings))
        self.path = path
        self.log_wallclock = log_wallclock
        self._file = None

    @classmethod
    def from_config(cls, config, out_dir):
        return cls(os.path.join(out_dir, METRICS_LOG_NAME), config.log_wallclock)

    def open(self):
        """Create the log file and write its header line"""
        if self.path is not None and self._file is None:
            self._file = open(self.path, "w", encoding="utf-8", newline="\n")
            self._file.write("\t".join(METRICS_COLUMNS) + "\n")
            self._file.flush()
        return self

    def close(self):
        if self._file is not None:
            self._file.close()
            self._file = None

    def __enter__(self):
        return self.open()

    def __exit__(self, exc_type, exc, tb):
        self.close()

    def record(self, step, breakdown, wallclock_ms=0.0):
        """Append one line for ``step`` and update the running stats."""
        wallclock = int(round(wallclock_ms)) if self.log_wallclock else 0
        row = (int(step), breakdown.rec, breakdown.reg, breakdown.diff, breakdown.total, wallclock)
        self.inc_value("lines")
        self.set_value("last_step", int(step))
        self.set_value("last_total", breakdown.total)
        if math.isfinite(breakdown.total):
            self.max_value("best_total", breakdown.total)
        if self._file is not None:
            self._file.write("\t".join(_format(v) for v in row) + "\n")
            self._file.flush()
        return row


def read_metrics_log(path):
    """Rows of a metrics log as dicts keyed by column name."""
    rows = []
    with open(path, encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split("\t")
        if tuple(header) != METRICS_COLUMNS:
            raise ValueError("%s is not a metrics log (header %r)" % (path, header))
        for line in f:
            if not line.strip():
                continue
            cells = line.rstrip("\n").split("\t")
            row = {key: float(cell) for key, cell in zip(header, cells)}
            row["step"] = int(cells[0])
            row["wallclock_ms"] = int(cells[-1])
            rows.append(row)
    return rows
