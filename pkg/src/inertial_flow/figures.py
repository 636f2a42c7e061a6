"""Optional PNG rendering of a run (needs the ``plot`` extra)."""

from __future__ import annotations

from pathlib import Path


def render_figures(trajectory, series, out_dir) -> list[Path]:
    """Write gap.png (F - F* and |v| against t) and, given an energy series, energy.png."""
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError("figures need matplotlib: pip install 'artifact[plot]'") from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    paths = []
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(trajectory.t, trajectory.gap(), label="F(x) - F*")
    ax.loglog(trajectory.t, trajectory.speed(), label="|v|", alpha=0.7)
    ax.set_xlabel("t")
    ax.legend()
    fig.tight_layout()
    paths.append(out_dir / "gap.png")
    fig.savefig(paths[-1], dpi=120)
    plt.close(fig)

    if series is not None:
        fig, ax = plt.subplots(figsize=(6, 4))
        for key in ("E", "H", "G"):
            ax.semilogx(series.t, getattr(series, key), label=key)
        ax.set_xlabel("t")
        ax.legend()
        fig.tight_layout()
        paths.append(out_dir / "energy.png")
        fig.savefig(paths[-1], dpi=120)
        plt.close(fig)
    return paths
