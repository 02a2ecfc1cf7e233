"""Tools package for the rough Bergomi VIX toolkit."""

from .quote_tool import QuoteTool
from .report_tool import ReportTool

__all__ = ['QuoteTool', 'ReportTool']
