import math
from unittest.mock import patch

from core.defs import FilterStatus
from core.stat_tracker import FilterStatTracker, stat_tracker


class TestFilterStatTracker:

    def setup_method(self):
        """Сбрасываем состояние трекера перед каждым тестом"""
        stat_tracker.reset()

    def test_add_decision(self):
        stat_tracker.add_decision(FilterStatus.PROJECTED)
        stat_tracker.add_decision("passed-desired")
        assert stat_tracker.count(FilterStatus.PROJECTED) == 1
        assert stat_tracker.count(FilterStatus.PASSED_DESIRED) == 1
        assert stat_tracker.steps == 2

    def test_fallback_reasons(self):
        stat_tracker.add_decision(FilterStatus.BACKUP_FALLBACK, "psi negative")
        stat_tracker.add_decision(FilterStatus.BACKUP_FALLBACK, "psi negative")
        stat_tracker.add_decision(FilterStatus.BACKUP_FALLBACK, "infeasible")
        assert stat_tracker._FilterStatTracker__diagnostics == {"psi negative": 2, "infeasible": 1}
        assert "Fallback Reason" in str(stat_tracker)

    def test_psi_ignores_nan(self):
        stat_tracker.add_psi(float("nan"))
        assert stat_tracker._FilterStatTracker__min_psi == math.inf
        stat_tracker.add_psi(0.5)
        stat_tracker.add_psi(0.2)
        assert stat_tracker._FilterStatTracker__min_psi == 0.2

    def test_controller_times(self):
        assert stat_tracker.mean_controller_time == 0.0
        stat_tracker.add_controller_time(0.01)
        stat_tracker.add_controller_time(0.03)
        assert abs(stat_tracker.mean_controller_time - 0.02) < 1e-12
        assert stat_tracker.max_controller_time == 0.03

    def test_counters(self):
        stat_tracker.add_decision(FilterStatus.RAW)
        stat_tracker.add_unsafe_step()
        stat_tracker.add_h(-0.1)
        counters = stat_tracker.get_counters()
        assert counters["steps"] == 1
        assert counters["statuses"]["raw"] == 1
        assert counters["unsafe_steps"] == 1
        assert counters["min_h"] == -0.1

    def test_str_representation_no_errors(self):
        stat_tracker.add_decision(FilterStatus.PASSED_DESIRED)
        result = str(stat_tracker)
        assert "Filter Stat" in result
        assert "Run Stat" in result
        assert "PASSED-DESIRED" in result
        assert "Fallback Reason" not in result
        assert "WARNING: The simulation stopped early!" not in result

    def test_str_representation_with_errors(self):
        stat_tracker.add_error("non-finite state at t=1.2300")
        result = str(stat_tracker)
        assert "WARNING: The simulation stopped early!" in result
        assert "non-finite state at t=1.2300" in result

    def test_reset(self):
        stat_tracker.add_decision(FilterStatus.RAW)
        stat_tracker.add_error("boom")
        stat_tracker.reset()
        assert stat_tracker.steps == 0
        assert "WARNING" not in str(stat_tracker)

    def test_instances_are_independent(self):
        other = FilterStatTracker()
        other.add_decision(FilterStatus.RAW)
        assert stat_tracker.steps == 0

    @patch('builtins.print')
    def test_show_summary(self, mock_print):
        stat_tracker.show_summary()
        assert mock_print.called
        assert mock_print.call_args[0][0].startswith('\n\n')
