import io
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional

import openpyxl
import pandas as pd
from openpyxl.styles import Alignment, Border, Font, PatternFill, Side
from openpyxl.utils import get_column_letter

from TextMetrics import round_half_up
from printer import Printer

printer = Printer.getInstance()

READABLE_NAMES = {
    "model_id": "Model",
    "dataset": "Dataset",
    "prompt_label": "Prompt",
    "placement": "Placement",
    "cer_orig": "OCR CER",
    "cer": "CER",
    "erp": "ERP",
    "share_improved": "Improved",
    "cones": "CoNES",
    "f1": "F1",
    "perplexity": "Perplexity",
    "n_documents": "Documents",
    "n_zero_original": "Perfect OCR",
    "n_failed": "Failed",
    "difference": "Difference",
    "block_size": "Lines",
    "cer_median": "CER (median)",
    "erp_median": "ERP (median)",
    "cer_mean": "CER (mean)",
    "erp_mean": "ERP (mean)",
}


@dataclass(frozen=True)
class CellStyle:
    font: Font
    fill: Optional[PatternFill] = None
    number_format: Optional[str] = None
    alignment: Optional[Alignment] = None


HEADER_STYLE = CellStyle(font=Font(bold=True, color="FFFFFF"), fill=PatternFill("solid", fgColor="008080"), alignment=Alignment(horizontal="center", vertical="center", wrap_text=True))
TEXT_STYLE = CellStyle(font=Font(), alignment=Alignment(horizontal="left"))
NUMBER_STYLE = CellStyle(font=Font(), number_format="0.00", alignment=Alignment(horizontal="right"))
COUNT_STYLE = CellStyle(font=Font(), number_format="0", alignment=Alignment(horizontal="right"))
THIN_BORDER = Border(bottom=Side(style="thin", color="808080"))


def readable(frame: pd.DataFrame) -> pd.DataFrame:
    return frame.rename(columns={column: READABLE_NAMES.get(column, column) for column in frame.columns})


def _format_value(value) -> str:
    if value is None or (isinstance(value, float) and value != value):
        return "-"
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return f"{round_half_up(value, 2):.2f}"
    return str(value)


def format_markdown(frame: pd.DataFrame, title: Optional[str] = None) -> str:
    """
    Renders the frame as a pipe table; floats are shown with two decimals (rounded half up), missing values as '-'.
    """
    frame = readable(frame)
    header = [str(column) for column in frame.columns]
    body = [[_format_value(value) for value in row] for row in frame.itertuples(index=False, name=None)]
    spacers = [max([len(header[i])] + [len(row[i]) for row in body]) for i in range(len(header))]
    numeric = [pd.api.types.is_numeric_dtype(frame[column]) for column in frame.columns]

    lines = [] if title is None else [f"## {title}", ""]
    lines.append("| " + " | ".join(f"{header[i]:<{spacers[i]}}" for i in range(len(header))) + " |")
    lines.append("|" + "|".join(("-" * (spacers[i] + 1) + ":") if numeric[i] else ("-" * (spacers[i] + 2)) for i in range(len(header))) + "|")
    for row in body:
        lines.append("| " + " | ".join(f"{row[i]:>{spacers[i]}}" if numeric[i] else f"{row[i]:<{spacers[i]}}" for i in range(len(header))) + " |")
    return "\n".join(lines) + "\n"


def write_markdown(tables: Mapping[str, pd.DataFrame], path: Optional[str | Path] = None) -> str:
    text = "\n".join(format_markdown(frame, title) for title, frame in tables.items())
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def write_csv(frame: pd.DataFrame, path: Optional[str | Path] = None, decimals: Optional[int] = 2) -> str:
    """
    Writes the frame as CSV with readable column names. Returns the CSV text.
    """
    frame = readable(frame.copy())
    if decimals is not None:
        for column in frame.columns:
            if pd.api.types.is_float_dtype(frame[column]):
                frame[column] = frame[column].map(lambda v: round_half_up(v, decimals))
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, lineterminator="\n")
    text = buffer.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def _set_cell_style(cell_style: CellStyle, target_cell) -> None:
    target_cell.font = cell_style.font
    if cell_style.fill is not None:
        target_cell.fill = cell_style.fill
    if cell_style.number_format is not None:
        target_cell.number_format = cell_style.number_format
    if cell_style.alignment is not None:
        target_cell.alignment = cell_style.alignment


def write_excel(sheets: Mapping[str, pd.DataFrame], path: str | Path, column_width: float = 14) -> None:
    """
    Writes each frame to its own sheet with a styled, frozen header row.

    :param sheets: Sheet name -> frame
    :param path: Target .xlsx file
    :param column_width: Width of all columns
    :return: None
    """
    if len(sheets) == 0:
        raise ValueError("No tables to write to the Excel report")
    wb = openpyxl.Workbook()
    for sheet_index, (sheet_name, frame) in enumerate(sheets.items()):
        frame = readable(frame)
        if sheet_index == 0:
            ws = wb.active
            ws.title = sheet_name[:31]
        else:
            ws = wb.create_sheet(title=sheet_name[:31])
        ws.sheet_properties.tabColor = "008080"
        ws.sheet_view.showGridLines = False
        ws.freeze_panes = "A2"
        ws.row_dimensions[1].height = 30

        for column_index, column in enumerate(frame.columns, start=1):
            cell = ws.cell(row=1, column=column_index, value=str(column))
            _set_cell_style(HEADER_STYLE, cell)
            ws.column_dimensions[get_column_letter(column_index)].width = column_width

            if pd.api.types.is_float_dtype(frame[column]):
                style = NUMBER_STYLE
            elif pd.api.types.is_integer_dtype(frame[column]):
                style = COUNT_STYLE
            else:
                style = TEXT_STYLE
            for row_index, value in enumerate(frame[column].to_list(), start=2):
                if isinstance(value, float) and value != value:
                    value = None
                cell = ws.cell(row=row_index, column=column_index, value=value)
                _set_cell_style(style, cell)
                cell.border = THIN_BORDER
    wb.save(path)
    printer.information(f"Excel report written to '{path}'")


def read_excel_sheet(path: str | Path, sheet_name: str) -> pd.DataFrame:
    return pd.read_excel(path, sheet_name=sheet_name, engine="openpyxl")

