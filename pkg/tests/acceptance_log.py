"""Shared registry of acceptance-criterion result lines."""

LINES: list[str] = []
