#!/usr/bin/env python3
"""CSV metrics file handling."""
import csv

#: Columns of metrics files.
HEADER = ('scenario', 'mode', 'k', 'data_time_ns', 'total_time_ns', 'payload_link_traversals',
          'acks_bytes', 'retx_count', 'early_ack_count', 'saving_ratio')


def write_csv(metrics, filename):
    """Save run metrics as one row per scenario and mode.

    Args:
        metrics (Iterable[RunMetrics]): Run metrics.
        filename (str): CSV output file path/name.
    """
    if not filename.endswith('.csv'):
        filename += '.csv'

    with open(filename, 'w', encoding='utf-8', newline='') as fp:
        writer = csv.writer(fp, lineterminator='\n')
        writer.writerow(HEADER)
        for m in metrics:
            writer.writerow(m.row())


def read_csv(filename):
    """Load rows of a metrics file.

    Args:
        filename (str): CSV input file path/name.

    Returns:
        list[dict]: One dictionary per row, numeric columns are converted.
    """
    if not filename.endswith('.csv'):
        filename += '.csv'

    ints = ('k', 'data_time_ns', 'total_time_ns', 'acks_bytes', 'retx_count', 'early_ack_count')
    rows = []
    with open(filename, encoding='utf-8', newline='') as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != HEADER:
            msg = f'Unexpected header in "{filename}": {reader.fieldnames}.'
            raise ValueError(msg)
        for row in reader:
            for key in ints:
                row[key] = int(row[key])
            row['payload_link_traversals'] = float(row['payload_link_traversals'])
            ratio = row['saving_ratio']
            row['saving_ratio'] = None if ratio == 'NA' else float(ratio)
            rows.append(row)
    return rows
