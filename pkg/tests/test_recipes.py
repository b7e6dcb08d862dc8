"""Every built-in recipe must finish under its declared wall-clock budget
and leave the full artifact set (data, figure, manifest) behind."""

import time

import pytest

from rare_reach.cli import RECIPE_BUDGETS, RECIPES, parse_config, run

_DATA_STEMS = {
    "fig1": ["parallel-sweep"],
    "fig2": ["parallel-sweep"],
    "fig3": ["restart-runs", "restart-summary"],
    "fig4": ["mm1k-appendix3"],
    "appendix1": ["mm1-appendix1"],
}

_FIGURE_STEMS = {
    "fig1": "parallel-sweep",
    "fig2": "parallel-sweep",
    "fig3": "restart-run",
    "fig4": "mm1k-appendix3",
    "appendix1": "mm1-appendix1",
}


@pytest.mark.parametrize("name", sorted(RECIPES))
def test_recipe_completes_under_declared_budget(name, tmp_path):
    spec = parse_config(RECIPES[name])
    started = time.time()
    files = run(spec, tmp_path, workers=2, plot=True)
    elapsed = time.time() - started
    budget = RECIPE_BUDGETS[name]
    print(f"recipe {name}: {elapsed:.1f}s of {budget:.0f}s budget")
    assert elapsed < budget
    for stem in _DATA_STEMS[name]:
        assert (tmp_path / f"{stem}.csv").exists()
    assert (tmp_path / f"{_FIGURE_STEMS[name]}.png").exists()
    assert (tmp_path / "manifest.txt").exists()
    assert all(p.exists() for p in files)
