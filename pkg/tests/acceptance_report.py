"""Pass/fail lines collected by the acceptance suite and echoed at the end of the run."""

ACCEPTANCE_LINES = []


def report_criterion(name, ok, detail=''):
    """Remember a pass/fail line for the terminal summary and return ``ok``."""
    line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f'  ({detail})' if detail else '')
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok
