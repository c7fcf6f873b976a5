"""Natural-language driven RTL-to-GDSII stage orchestration and a TCL-aware
CodeBLEU evaluator."""

__version__ = "0.1.0"
