from .settings import Settings
from .report_formats import CSV_COLUMNS, SUITE_SUMMARY

__all__ = [
    'Settings',
    'CSV_COLUMNS',
    'SUITE_SUMMARY'
]
