def pytest_configure(config):
    config.addinivalue_line("markers", "slow: full-size Monte Carlo and reference runs")
