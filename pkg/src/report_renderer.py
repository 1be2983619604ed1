"""
HTML rendering of experiment result tables with Jinja2.
"""

import os

from jinja2 import Environment, FileSystemLoader, select_autoescape

from waveform_io import atomic_write_text

TEMPLATE_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "templates")
RESULTS_TEMPLATE = "experiment_report.html"


def _mhz(value):
    return "" if value is None else f"{value / 1e6:g}MHz"


def _rate(value):
    if value is None or value != value:
        return ""
    return f"{value / 1e6:g}Mb/s"


def _number(value, digits=2):
    if value is None or value != value:
        return ""
    return f"{value:.{digits}f}"


def _environment(template_dir=TEMPLATE_DIR):
    env = Environment(loader=FileSystemLoader(template_dir), autoescape=select_autoescape(["html"]))
    env.filters["mhz"] = _mhz
    env.filters["rate"] = _rate
    env.filters["number"] = _number
    return env


def render_results_html(table, out_path, title="experiment", template_dir=TEMPLATE_DIR):
    """
    Render a results table to HTML.

    Args:
        table (pd.DataFrame): Experiment results (one line per packet)
        out_path (str): Output .html path
        title (str): Page title

    Returns:
        str: Absolute path of the written file
    """
    template = _environment(template_dir).get_template(RESULTS_TEMPLATE)
    rows = table.astype(object).where(table.notna(), None).to_dict(orient="records")
    html = template.render(title=title, rows=rows)
    return atomic_write_text(out_path, html)
