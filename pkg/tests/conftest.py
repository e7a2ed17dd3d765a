from acceptance_log import VERDICTS


def pytest_configure(config):
    config.stash[VERDICTS] = {}


def pytest_terminal_summary(terminalreporter, config):
    verdicts = config.stash.get(VERDICTS, {})
    if not verdicts:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(verdicts, key=lambda k: int(k.split()[0])):
        terminalreporter.write_line(verdicts[key])
