import collections
import collections.abc
import logging
import os
import sqlite3
import tempfile
from typing import Any, Dict, List, Mapping, Sequence


logger = logging.getLogger(__name__)

# a column named `<name>_type` gives the SQLite type of the column `<name>`
SQLITE_TYPE_PATTERN = '_type'


def table_create(cursor, table_name: str, name_type_list: List[str], primary_key=None) -> None:
    """
    Create a table

    Args:
        cursor: the cursor
        table_name: the name of the table
        name_type_list: the column definitions
        primary_key: feature index of the primary key or None
    """
    if primary_key is not None:
        assert primary_key < len(name_type_list), \
            f'primary key ({primary_key}) is outside the number of columns ({len(name_type_list)})!'
        name_type_list[primary_key] = name_type_list[primary_key] + ' PRIMARY KEY'

    table_definition = ', '.join(name_type_list)
    cursor.execute(f"CREATE TABLE '{table_name}' ({table_definition});")


def table_insert(cursor, table_name: str, names: Sequence[str], values: Sequence) -> None:
    """
    Insert into an existing table

    Args:
        cursor: the cursor
        table_name: the name of the table
        names: the names of the columns to insert
        values: a row, or a list of row tuples
    """
    assert len(values) > 0
    if isinstance(values[0], tuple):
        assert len(values[0]) == len(names)
        insert_fn = cursor.executemany
    else:
        assert len(values) == len(names)
        insert_fn = cursor.execute

    names_str = ','.join(names)
    values_str = ','.join(['?'] * len(names))
    insert_fn(f"INSERT INTO '{table_name}' ({names_str}) VALUES ({values_str})", values)


def get_metadata_name(table_name: str) -> str:
    """
    Return the name of the table metadata for table ``table_name``
    """
    return table_name + '_metadata'


def get_tables_name_and_role(cursor) -> List[tuple]:
    """
    Return all the table names and table role

    Returns:
        a list of (table name, table role)
    """
    names = cursor.execute("SELECT name FROM sqlite_master WHERE type='table';").fetchall()
    name_roles = []
    for name, in names:
        if name.endswith('_metadata'):
            continue
        v = cursor.execute(f"SELECT table_role FROM '{get_metadata_name(name)}';").fetchall()
        assert len(v) == 1, f'got={v}, name={name}'
        name_roles.append((name, v[0][0]))
    return name_roles


def get_table_data(cursor, table_name: str) -> Dict[str, list]:
    """
    Extract all the data of the table

    Returns:
        a dictionary of (name, values)
    """
    cursor = cursor.execute(f"select * from '{table_name}'")
    column_names = [column[0] for column in cursor.description]
    rows = cursor.fetchall()
    columns = list(zip(*rows)) if rows else [()] * len(column_names)
    return collections.OrderedDict((name, list(values)) for name, values in zip(column_names, columns))


def table_add_columns(cursor, table_name: str, column_names: Sequence[str]) -> None:
    for c in column_names:
        cursor.execute(f"ALTER TABLE '{table_name}' ADD '{c}';")


class TableStream:
    """
    A SQLite table that can be streamed.

    Two tables will be created:

    1) in ``table_name``:
        - feature name with ``*_type`` will have SQLITE type ``type``. Other columns are typed from their first
          value (REAL, INTEGER or TEXT)

    2) in ``table_name``_metadata:
        - ``table_role``: the role of the table
        - ``table_preamble``: an explanation or complementary info of the table
    """
    def __init__(self, cursor, table_name: str, table_role: str, primary_key=None, table_preamble: str = ''):
        self.table_name = table_name
        self.cursor = cursor
        self.table_role = table_role
        self.primary_key = primary_key
        self.table_preamble = table_preamble

        try:
            # load the column names if the table already exists
            self.column_names = set(self.get_column_names())
        except sqlite3.OperationalError:
            self.column_names = set()

    def _create(self, name_type_list: List[tuple]) -> None:
        metadata_name = get_metadata_name(self.table_name)
        table_create(self.cursor, metadata_name, ['table_role TEXT', 'table_preamble TEXT'])
        table_insert(self.cursor, metadata_name, names=['table_role', 'table_preamble'],
                     values=[self.table_role, self.table_preamble])

        # names are quoted so that they can be SQL keywords or contain `:`
        content = [f"'{name}' {value_type}" for name, value_type in name_type_list]
        table_create(self.cursor, self.table_name, content, primary_key=self.primary_key)
        self.column_names = {name for name, _ in name_type_list}

    @staticmethod
    def _sql_type(value: Any) -> str:
        if isinstance(value, (bool, int)):
            return 'INTEGER'
        if isinstance(value, float):
            return 'REAL'
        return 'TEXT'

    def insert(self, batch: Mapping[str, Sequence]) -> None:
        """
        Insert a batch of data to the table. If the table doesn't exist, it will be created.

        Args:
            batch: a dictionary like of names and values. All values must have the same length.
        """
        assert isinstance(batch, collections.abc.Mapping), 'must be a dict like structure!'
        value_size = len(next(iter(batch.values())))
        for name, value in batch.items():
            assert hasattr(value, '__len__'), f'type={type(value)} has no __len__'
            assert len(value) == value_size, f'All values must have the same size! Got={len(value)}' \
                                             f' for name={name} expected={value_size}'
        if value_size == 0:
            return

        columns = {name: value for name, value in batch.items() if not name.endswith(SQLITE_TYPE_PATTERN)}
        rows = self.cursor.execute("SELECT name FROM sqlite_master WHERE type='table' AND name=?;",
                                   (self.table_name,)).fetchall()
        if len(rows) == 0:
            name_type_list = []
            for name, values in columns.items():
                value_type = batch.get(name + SQLITE_TYPE_PATTERN)
                if value_type is not None:
                    value_type = value_type[0]
                else:
                    value_type = self._sql_type(values[0])
                name_type_list.append((name, value_type))
            self._create(name_type_list)
        else:
            # if it exists, make sure all the columns exist!
            missing_columns = [name for name in columns if name not in self.column_names]
            if missing_columns:
                table_add_columns(self.cursor, self.table_name, missing_columns)
                self.column_names.update(missing_columns)

        names = [f"'{name}'" for name in columns]
        table_insert(self.cursor, self.table_name, names, list(zip(*columns.values())))

    def get_column_names(self) -> List[str]:
        r = self.cursor.execute(f"select * from '{self.table_name}'")
        return [n[0] for n in r.description]


def records_to_columns(records: Sequence[Mapping[str, Any]]) -> Dict[str, list]:
    """Transpose records sharing the same fields into columns"""
    assert len(records) > 0, 'no record'
    names = list(records[0].keys())
    return collections.OrderedDict((name, [r[name] for r in records]) for name in names)


def write_run_database(path: str, tables: Mapping[str, tuple]) -> None:
    """
    Write a SQLite database atomically: the database is built in a temporary file of the destination
    folder, then renamed.

    Args:
        path: destination of the database
        tables: table name to a tuple (role, records)
    """
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=folder, prefix='.' + os.path.basename(path), suffix='.tmp')
    os.close(fd)
    try:
        connection = sqlite3.connect(tmp_path)
        try:
            cursor = connection.cursor()
            for table_name, (role, records) in tables.items():
                if len(records) == 0:
                    continue
                TableStream(cursor, table_name, role).insert(records_to_columns(records))
            connection.commit()
        finally:
            connection.close()
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.info(f'run database written={path}')
