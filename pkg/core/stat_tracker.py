import math
from collections import Counter

from terminaltables import AsciiTable

from core.defs import FilterStatus


class FilterStatTracker:

    def __init__(self):
        self.reset()

    def reset(self):
        self.__statuses = Counter()
        self.__diagnostics = Counter()
        self.__controller_times = []
        self.__unsafe_steps = 0
        self.__min_psi = math.inf
        self.__min_h = math.inf
        self.__errors = []

    def add_decision(self, status: FilterStatus, diagnostic: str = None):
        self.__statuses[FilterStatus(status)] += 1
        if diagnostic:
            self.__diagnostics[diagnostic] += 1

    def add_controller_time(self, seconds: float):
        self.__controller_times.append(seconds)

    def add_psi(self, psi: float):
        if not math.isnan(psi):
            self.__min_psi = min(self.__min_psi, psi)

    def add_h(self, h: float):
        self.__min_h = min(self.__min_h, h)

    def add_unsafe_step(self):
        self.__unsafe_steps += 1

    def add_error(self, message: str):
        self.__errors.append(message)

    @property
    def steps(self) -> int:
        return sum(self.__statuses.values())

    def count(self, status: FilterStatus) -> int:
        return self.__statuses[FilterStatus(status)]

    @property
    def mean_controller_time(self) -> float:
        if not self.__controller_times:
            return 0.0
        return sum(self.__controller_times) / len(self.__controller_times)

    @property
    def max_controller_time(self) -> float:
        return max(self.__controller_times, default=0.0)

    def __str__(self):
        status_stat = [['Filter Stat', 'Steps']]
        for status in FilterStatus:
            status_stat.append([status.value.upper(), self.__statuses[status]])
        status_stat.append(['TOTAL', self.steps])
        status_table = AsciiTable(status_stat)

        run_stat = [
            ['Run Stat', 'Value'],
            ['MIN PSI', f"{self.__min_psi:.6g}"],
            ['MIN H', f"{self.__min_h:.6g}"],
            ['UNSAFE STEPS', self.__unsafe_steps],
            ['MEAN CONTROLLER TIME (ms)', f"{1000 * self.mean_controller_time:.3f}"],
            ['MAX CONTROLLER TIME (ms)', f"{1000 * self.max_controller_time:.3f}"],
        ]
        run_table = AsciiTable(run_stat)

        result = str(status_table.table) + "\n\n" + str(run_table.table) + "\n\n"
        if self.__diagnostics:
            fallback_stat = [['Fallback Reason', 'Steps']]
            fallback_stat.extend([reason, count] for reason, count in sorted(self.__diagnostics.items()))
            result += str(AsciiTable(fallback_stat).table) + "\n\n"
        if self.__errors:
            result += "\n\nWARNING: The simulation stopped early!\n"
            result += "\n".join(self.__errors) + "\n"
        return result

    def show_summary(self):
        print("\n\n" + self.__str__())

    def get_counters(self):
        return {
            "steps": self.steps,
            "statuses": {status.value: self.__statuses[status] for status in FilterStatus},
            "diagnostics": dict(self.__diagnostics),
            "unsafe_steps": self.__unsafe_steps,
            "min_psi": self.__min_psi,
            "min_h": self.__min_h,
            "mean_controller_time": self.mean_controller_time,
            "max_controller_time": self.max_controller_time,
        }


"""
Singleton only!
"""
stat_tracker = FilterStatTracker()
