# -*- coding: utf-8 -*-
import pytest
from scrapy.settings import BaseSettings
from scrapy.statscollectors import StatsCollector

from ddvi_lab.objectives import LossBreakdown
from ddvi_lab.stats import METRICS_COLUMNS, MetricsLog, read_metrics_log


def breakdown(total):
    return LossBreakdown(rec=-1.25, reg=-0.5, diff=0.1, total=total, beta_reg=1.0, beta_diff=1.0)


def test_counters():
    log = MetricsLog()
    log.inc_value("steps")
    log.inc_value("steps", 2)
    log.max_value("peak", 3)
    log.max_value("peak", 1)
    log.min_value("low", 3)
    log.min_value("low", 1)
    assert log.get_stats() == {"steps": 3, "peak": 3, "low": 1}
    assert log.get_value("missing", 7) == 7
    log.clear_stats()
    assert log.get_stats() == {}


def test_is_a_scrapy_stats_collector():
    log = MetricsLog()
    assert isinstance(log, StatsCollector)
    assert log._dump is False
    loud = MetricsLog(settings=BaseSettings({"STATS_DUMP": True}))
    assert loud._dump is True
    loud.set_value("epoch", 3)
    assert loud.get_stats() == {"epoch": 3}


def test_record_without_a_file():
    log = MetricsLog()
    row = log.record(5, breakdown(-2.0), 12.6)
    assert row == (5, -1.25, -0.5, 0.1, -2.0, 13)
    log.record(6, breakdown(float("nan")))
    assert log.get_value("lines") == 2
    assert log.get_value("last_step") == 6
    assert log.get_value("best_total") == -2.0


def test_log_file(tmp_path):
    path = str(tmp_path / "metrics.tsv")
    with MetricsLog(path, log_wallclock=False) as log:
        log.record(10, breakdown(-1.0), 99.0)
        log.record(20, breakdown(-0.75), 99.0)
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    assert lines[0] == "\t".join(METRICS_COLUMNS)
    assert lines[1] == "10\t-1.25\t-0.5\t0.1\t-1.0\t0"
    rows = read_metrics_log(path)
    assert [r["step"] for r in rows] == [10, 20]
    assert rows[1]["total"] == -0.75
    assert rows[0]["wallclock_ms"] == 0


def test_read_rejects_other_files(tmp_path):
    path = tmp_path / "other.tsv"
    path.write_text("a\tb\n1\t2\n")
    with pytest.raises(ValueError, match="not a metrics log"):
        read_metrics_log(str(path))
