"""Inequality rules, verdict logic and fuzzed suites."""
