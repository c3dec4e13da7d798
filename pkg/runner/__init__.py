"""Scenario runner: config models, scenario builders, reports and the ``run`` CLI."""
