"""Invoke tasks for development."""
from invoke import task


@task
def format(ctx):
    """Format code with black."""
    ctx.run("black load_disaggregation tests")


@task
def lint(ctx):
    """Lint code with ruff."""
    ctx.run("ruff check load_disaggregation tests")


@task
def typecheck(ctx):
    """Type check with mypy."""
    ctx.run("mypy load_disaggregation")


@task
def test(ctx, verbose=False):
    """Run tests with pytest."""
    verbose_flag = "-v" if verbose else ""
    ctx.run(f"pytest {verbose_flag}")


@task
def test_cov(ctx):
    """Run tests with coverage."""
    ctx.run("pytest --cov=load_disaggregation --cov-report=html --cov-report=term")


@task
def generate(ctx, seed=42, out="outputs/scenario"):
    """Generate the default synthetic scenario."""
    ctx.run(f"load-disaggregation generate --seed {seed} --out {out}")


@task
def pipeline(ctx, manifest="manifests/default.yaml", out="outputs"):
    """Run evaluate, sweep, powerflow and report for one manifest."""
    ctx.run(f"load-disaggregation evaluate --manifest {manifest} --out {out}")
    ctx.run(f"load-disaggregation sweep --manifest {manifest} --out {out}")
    ctx.run(f"load-disaggregation powerflow --manifest {manifest} --out {out}")
    ctx.run(f"load-disaggregation report --out {out}")


@task(pre=[format, lint, typecheck, test])
def check(ctx):
    """Run all checks (format, lint, typecheck, test)."""
    print("All checks passed!")
