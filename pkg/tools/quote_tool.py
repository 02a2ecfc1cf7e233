"""Quote tool for loading market quotes and run documents from CSV and JSON files."""

import json
import logging
from pathlib import Path
from typing import Any, Dict, List

import pandas as pd

from config import Config

logger = logging.getLogger(__name__)

# column schemas of the quote files
OPTION_COLUMNS = ['maturity_years', 'strike', 'forward', 'implied_vol']
FUTURES_COLUMNS = ['maturity_years', 'price']
CALL_COLUMNS = ['maturity_years', 'strike', 'price']

SCHEMAS = {
    'options': OPTION_COLUMNS,
    'futures': FUTURES_COLUMNS,
    'calls': CALL_COLUMNS,
}


class QuoteTool:
    """Tool for loading and validating quote tables."""

    def __init__(self):
        """Initialize the quote tool."""
        self.config = Config()

    def load_quotes(self, csv_path: str, kind: str) -> pd.DataFrame:
        """
        Load a quote CSV and check it against its schema.

        Args:
            csv_path: Path to the CSV file
            kind: One of 'options', 'futures' or 'calls'

        Returns:
            Cleaned dataframe sorted by maturity (and strike when present)
        """
        if kind not in SCHEMAS:
            raise ValueError(f"Unknown quote kind: {kind}")
        try:
            path = Path(csv_path)
            if not path.exists():
                raise FileNotFoundError(f"Quote file not found: {csv_path}")

            logger.info(f"Loading {kind} quotes: {csv_path}")
            df = self._clean_dataframe(pd.read_csv(path))

            missing = [c for c in SCHEMAS[kind] if c not in df.columns]
            if missing:
                raise ValueError(f"{path.name} is missing columns {missing}")
            if df.empty:
                raise ValueError(f"{path.name} contains no quotes")

            if kind == 'options' and 'weight' not in df.columns:
                df['weight'] = 1.0
            numeric = SCHEMAS[kind] + (['weight'] if kind == 'options' else [])
            df[numeric] = df[numeric].apply(pd.to_numeric, errors='raise')

            sort_keys = [c for c in ('maturity_years', 'strike') if c in df.columns]
            df = df.sort_values(sort_keys, kind='mergesort').reset_index(drop=True)
            logger.info(self._generate_summary(df, path.name))
            return df

        except Exception as e:
            logger.error(f"Error loading quotes from {csv_path}: {e}")
            raise

    def load_records(self, csv_path: str, kind: str) -> List[Dict[str, Any]]:
        """Quote rows as plain dictionaries."""
        return self.load_quotes(csv_path, kind).to_dict(orient='records')

    def _clean_dataframe(self, df: pd.DataFrame) -> pd.DataFrame:
        """
        Drop empty rows/columns and normalise header names.

        Args:
            df: Input dataframe

        Returns:
            Cleaned dataframe
        """
        df = df.dropna(how='all')
        df = df.dropna(axis=1, how='all')
        df.columns = [str(c).strip().lower() for c in df.columns]
        return df

    def _generate_summary(self, df: pd.DataFrame, filename: str) -> str:
        parts = [f"{filename}: {len(df)} quotes"]
        if 'maturity_years' in df.columns:
            maturities = sorted(df['maturity_years'].unique())
            parts.append(f"{len(maturities)} maturities in [{maturities[0]:g}, {maturities[-1]:g}]")
        return ", ".join(parts)

    def load_json(self, json_path: str) -> Dict[str, Any]:
        """
        Load a JSON document (run configuration, fitted surface, curve).

        Args:
            json_path: Path to the JSON file

        Returns:
            Parsed document
        """
        try:
            path = Path(json_path)
            if not path.exists():
                raise FileNotFoundError(f"JSON file not found: {json_path}")
            with open(path, 'r', encoding='utf-8') as f:
                data = json.load(f)
            logger.info(f"Loaded {path.name}")
            return data
        except Exception as e:
            logger.error(f"Error loading JSON file {json_path}: {e}")
            raise

    def validate_quote_file(self, csv_path: str, kind: str) -> bool:
        """
        Check that a quote file exists and matches its schema.

        Returns:
            True if the file is valid, False otherwise
        """
        try:
            self.load_quotes(csv_path, kind)
            return True
        except Exception as e:
            logger.error(f"Quote file validation failed for {csv_path}: {e}")
            return False
