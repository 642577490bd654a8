"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

import sys

RESULTS = []


def report(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title} ({detail})"
    RESULTS.append(line)
    print(line, file=sys.__stdout__, flush=True)
