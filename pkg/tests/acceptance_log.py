"""Collects one pass/fail verdict per acceptance check for the run summary."""

RESULTS = []


def record(criterion: str, ok: bool, detail: str) -> bool:
    RESULTS.append((criterion, bool(ok), detail))
    print(format_line(criterion, ok, detail))
    return ok


def format_line(criterion: str, ok: bool, detail: str) -> str:
    return f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"


def lines():
    return [format_line(*r) for r in sorted(RESULTS, key=lambda r: r[0])]
