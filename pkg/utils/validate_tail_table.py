#!/usr/bin/env python3
"""
Tabulated Tail File Validation and Repair Utility

Checks a two-column ``t,I`` CSV before it is used as a tabulated
tail-capturing function, and can write a repaired copy.

Usage:
    python -m utils.validate_tail_table path/to/tail.csv
    python -m utils.validate_tail_table --repair path/to/tail.csv
"""

import argparse
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import TableFormatError
from .tail_model import classify_growth, load_tabulated_csv


def validate_tail_table(file_path, repair=False):
    """Validate a tail table and optionally write ``<stem>_repaired.csv``.

    Returns True when the file (or its repaired copy) loads cleanly.
    """
    file_path = Path(file_path)

    print(f"🔍 Validating tail table: {file_path.name}")
    if not file_path.exists():
        print("❌ Error: File does not exist")
        return False
    print(f"📏 File size: {file_path.stat().st_size:,} bytes")

    try:
        f = load_tabulated_csv(file_path)
    except TableFormatError as e:
        print(f"❌ {e}")
        if not repair:
            return False
        return repair_tail_table(file_path)

    print(f"✅ {len(f.grid_t)} grid points from t={f.grid_t[0]:g} to t={f.grid_t[-1]:g}")
    print(f"📄 Growth class: {classify_growth(f).value}")
    return True


def repair_tail_table(file_path):
    """Sort by t, drop duplicate t, and make I nondecreasing by running maximum."""
    file_path = Path(file_path)
    repaired_path = file_path.parent / f"{file_path.stem}_repaired.csv"
    print(f"🔧 Repairing file: {repaired_path.name}")

    try:
        frame = pd.read_csv(file_path, skipinitialspace=True)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        print(f"❌ Cannot repair, file is not CSV: {e}")
        return False

    frame.columns = [str(c).strip() for c in frame.columns]
    if list(frame.columns) != ["t", "I"]:
        print("❌ Cannot repair, header must be 't,I'")
        return False

    original = len(frame)
    frame = frame.apply(pd.to_numeric, errors="coerce")
    frame = frame[np.isfinite(frame["t"]) & np.isfinite(frame["I"])]
    print(f"   ✂️  Dropped {original - len(frame):,} non-numeric rows")

    frame = frame.sort_values("t", kind="mergesort").drop_duplicates("t", keep="first")
    frame["I"] = np.maximum.accumulate(frame["I"].clip(lower=0.0).to_numpy())
    if len(frame) < 2:
        print("❌ Cannot repair, fewer than two usable rows remain")
        return False

    frame.to_csv(repaired_path, index=False, float_format="%.17g")
    print(f"✅ Repaired file created: {repaired_path} ({len(frame):,} rows)")

    try:
        load_tabulated_csv(repaired_path)
        print("   ✅ Repaired file validates cleanly")
    except TableFormatError as e:
        print(f"   ⚠️  Repaired file validation warning: {e}")
        return False
    return True


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="Validate and repair tabulated tail files (t,I)",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  python -m utils.validate_tail_table tail.csv
  python -m utils.validate_tail_table --repair tail.csv
        """
    )
    parser.add_argument('file_path', help='Path to the t,I CSV file')
    parser.add_argument('--repair', action='store_true',
                        help='Write <stem>_repaired.csv if issues are found')
    args = parser.parse_args(argv)

    print("🛠️  Tail Table Validation and Repair Utility")
    print("=" * 50)
    success = validate_tail_table(args.file_path, args.repair)
    print("=" * 50)
    if success:
        print("✅ Validation completed successfully")
    else:
        print("❌ Validation found critical issues")
        if not args.repair:
            print("💡 Tip: Try using --repair to fix the issues")
        sys.exit(1)


if __name__ == '__main__':
    main()
