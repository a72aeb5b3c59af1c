from .records import slot_record, slot_records, summary_record, render, parse, write_report, report_filename, \
    round_significant, FORMATS, FORMAT_TABLE, FORMAT_DELIMITED, FORMAT_STRUCTURED, REPORT_EXTENSIONS
from .table_sqlite import TableStream, write_run_database, records_to_columns, get_table_data, \
    get_tables_name_and_role, get_metadata_name
from .plots import plot_profit_series, plot_allocation_shares, export_figure
