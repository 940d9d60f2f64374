# %%

import matplotlib
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

from .core.series import ordinal_index


def visualize_outliers(prices, flags, reference_year, fig: matplotlib.figure.Figure = None):
    """ Price over trading days elapsed since the start of ``reference_year``, flagged days in red

    Args:
        prices (PriceSeries): price history
        flags (list of OutlierFlag): detection flags
        reference_year (int): year whose first trading day is day 0
        fig (matplotlib.figure.Figure): matplotlib figure handle

    Returns:
        plot: handle to the axes
    """
    if fig is None:
        fig = plt.figure()

    calendar = ordinal_index(prices, reference_year)
    dates = [d for d in prices.dates if d in calendar]
    x = np.array([calendar.ordinal(d) for d in dates])
    y = np.array([prices.values[prices.position(d)] for d in dates])
    marked = [f.day.date for f in flags if f.flagged and f.day.date in calendar]

    ax = fig.add_subplot(1, 1, 1)
    ax.plot(x, y, color="blue", label="Actual")
    ax.plot(
        [calendar.ordinal(d) for d in marked],
        [prices.values[prices.position(d)] for d in marked],
        marker="o",
        linestyle="None",
        color="red",
        label="Outlier",
    )
    ax.set_title("Flagged outliers of " + prices.symbol)
    ax.set_xlabel("Trading days since the first trading day of {0}".format(reference_year))
    ax.set_ylabel("Adjusted close")
    ax.legend()
    ax.grid(alpha=0.3)
    return ax


def visualize_windows(symbol, blocks, fig: matplotlib.figure.Figure = None):
    """ One panel per window: actual price and every model's predicted prices

    Args:
        symbol (str): ticker in the title
        blocks (dict): window name -> plot-data frame (Day, Date, Actual, one column per model)
        fig (matplotlib.figure.Figure): matplotlib figure handle

    Returns:
        list: axes handles
    """
    if fig is None:
        fig = plt.figure()

    axes = []
    n = max(len(blocks), 1)
    fig.suptitle("Anomalous periods of " + symbol)
    for i, (name, block) in enumerate(blocks.items()):
        ax = fig.add_subplot(n, 1, i + 1)
        ax.plot(block["Day"], block["Actual"].astype(float), color="blue", label="Actual")
        for column in block.columns[3:]:
            values = pd.to_numeric(block[column], errors="coerce")
            ax.plot(block["Day"], values, marker="o", alpha=0.8, label=column)
        ax.set_title(name, rotation=-90, loc="right", y=0.5, ha="left", va="center")
        ax.set_ylabel("Price")
        ax.grid(alpha=0.3)
        if i == n - 1:
            ax.set_xlabel("Day")
            ax.legend(fontsize="small")
        else:
            ax.set_xticklabels([])
        axes.append(ax)
    return axes


def save_window_plot(name, block, path):
    fig = plt.figure()
    visualize_windows(name.split("_")[0], {name: block}, fig)
    fig.savefig(path, dpi=100)
    plt.close(fig)
