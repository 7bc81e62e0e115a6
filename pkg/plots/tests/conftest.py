import sys
from pathlib import Path

# make plots.py importable when the package is not installed
sys.path.insert(0, str(Path(__file__).resolve().parent.parent))
