"""
Plots of a run: profit per slot of the proposed allocations and of the baselines, and the share of each data
center in the green and brown request rates of every class
"""
import logging
import os
from typing import List, Sequence

import matplotlib
matplotlib.use('Agg')
import matplotlib.pyplot as plt
import numpy as np

from greendc.allocation import BROWN, GREEN, SUPPLY_NAMES
from greendc.energy.types import DataCenterSpec, ServiceClass
from greendc.simulation.run import RunSummary, allocation_shares
from greendc.utils.files import safe_filename


logger = logging.getLogger(__name__)


def fig_tight_layout(fig):
    """
    Make the figures not overlapping
    """
    try:
        fig.tight_layout()
    except Exception as e:
        logger.error(f'tight_layout failed={e}')


def export_figure(fig, path: str, name: str, dpi: int = 100) -> str:
    """
    Export a figure as PNG. The image is written to a temporary file then renamed

    Returns:
        the path of the image
    """
    full_path = os.path.join(path, safe_filename(name) + '.png')
    tmp_path = full_path + '.tmp.png'
    fig.savefig(tmp_path, dpi=dpi)
    os.replace(tmp_path, full_path)
    return full_path


def plot_profit_series(root: str, summary: RunSummary, title: str = 'profit per slot') -> str:
    """
    Profit of every slot for the proposed allocations and each baseline
    """
    slots = np.arange(len(summary.reports))
    fig = plt.figure()
    ax = fig.add_subplot(111)
    ax.plot(slots, summary.slot_profits, label='proposed', marker='o', markersize=3)
    for name, profits in summary.baseline_profits.items():
        ax.plot(slots, profits, label=name, linestyle='--')
    ax.set_xlabel('slot')
    ax.set_ylabel('profit')
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend(loc='best')
    fig_tight_layout(fig)
    path = export_figure(fig, root, title)
    plt.close(fig)
    return path


def plot_allocation_shares(root: str,
                           summary: RunSummary,
                           dcs: Sequence[DataCenterSpec],
                           classes: Sequence[ServiceClass]) -> List[str]:
    """
    One stacked plot per (supply, class): the share of each data center in the request rate of the class
    """
    paths = []
    slots = np.arange(len(summary.reports))
    for supply in (GREEN, BROWN):
        shares = np.nan_to_num(allocation_shares(summary, supply))
        for j, cls in enumerate(classes):
            title = f'{SUPPLY_NAMES[supply]} share {cls.name}'
            fig = plt.figure()
            ax = fig.add_subplot(111)
            ax.stackplot(slots, shares[:, :, j].T, labels=[dc.name for dc in dcs], alpha=0.8)
            ax.set_xlabel('slot')
            ax.set_ylabel('share of the request rate')
            ax.set_ylim(0, 1)
            ax.set_title(title)
            ax.legend(loc='upper right')
            fig_tight_layout(fig)
            paths.append(export_figure(fig, root, title))
            plt.close(fig)
    return paths
