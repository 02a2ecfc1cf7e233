"""Report tool for writing result tables and fitted objects."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from openpyxl.styles import Font

from config import Config

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.12g'


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


class ReportTool:
    """Tool for saving run outputs as CSV, JSON and an optional xlsx workbook."""

    def __init__(self, output_dir: Optional[str] = None):
        """Initialize the report tool."""
        self.output_dir = Path(Config.ensure_output_dir(output_dir))
        self.tables: Dict[str, pd.DataFrame] = {}
        logger.info(f"ReportTool initialized (output: {self.output_dir})")

    def save_table(self, records: Sequence[Dict[str, Any]], name: str,
                   columns: Optional[List[str]] = None) -> str:
        """
        Save records as a CSV table and keep them for the workbook.

        Args:
            records: One dictionary per row
            name: File stem, e.g. 'vix_futures'
            columns: Column order (defaults to the first record's keys)

        Returns:
            Path to the saved file
        """
        try:
            df = pd.DataFrame(list(records))
            if columns:
                df = df[columns]
            path = self.output_dir / f"{name}.csv"
            df.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
            self.tables[name] = df
            logger.info(f"Saved {len(df)} rows to {path}")
            return str(path)
        except Exception as e:
            logger.error(f"Error saving table {name}: {e}")
            raise

    def save_json(self, document: Dict[str, Any], name: str) -> str:
        """
        Save a document (fitted surface, calibration report) as sorted, indented JSON.

        Returns:
            Path to the saved file
        """
        try:
            path = self.output_dir / f"{name}.json"
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(_jsonable(document), f, indent=2, sort_keys=True)
                f.write('\n')
            logger.info(f"Saved {path}")
            return str(path)
        except Exception as e:
            logger.error(f"Error saving JSON {name}: {e}")
            raise

    def save_workbook(self, filename: str = "report.xlsx") -> str:
        """
        Write every table saved so far into one formatted xlsx workbook.

        Returns:
            Path to the saved workbook
        """
        try:
            path = self.output_dir / filename
            with pd.ExcelWriter(path, engine='openpyxl') as writer:
                for name, df in self.tables.items():
                    sheet = name[:31]
                    df.to_excel(writer, sheet_name=sheet, index=False)
                    worksheet = writer.sheets[sheet]

                    # Auto-adjust column widths
                    for column in worksheet.columns:
                        width = max(len(str(cell.value)) if cell.value is not None else 0 for cell in column)
                        worksheet.column_dimensions[column[0].column_letter].width = min(width + 2, 40)

                    # Make header row bold
                    for cell in worksheet[1]:
                        cell.font = Font(bold=True)

            logger.info(f"Saved {len(self.tables)} tables to {path}")
            return str(path)
        except Exception as e:
            logger.error(f"Error saving workbook: {e}")
            raise
