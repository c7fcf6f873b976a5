"""CodeBLEU for TCL scripts with EDA-aware weighting."""
from .commands import EdaCommandDb, default_db, detect_stage
from .dfg import DataFlowGraph, DfgNode, extract_dfg
from .evaluate import STAGE_WEIGHTS, CodeBleuReport, CodeBleuWeights, evaluate, report_from_components
from .match import (
    corpus_syntax_match,
    dataflow_match,
    ngram_match,
    syntax_match,
    weighted_ngram_match,
)
from .tokenizer import TclTokenStream, Token, tokenize

__all__ = [
    "CodeBleuReport", "CodeBleuWeights", "DataFlowGraph", "DfgNode", "EdaCommandDb",
    "STAGE_WEIGHTS", "TclTokenStream", "Token", "corpus_syntax_match", "dataflow_match",
    "default_db", "detect_stage", "evaluate", "extract_dfg", "ngram_match",
    "report_from_components", "syntax_match", "tokenize", "weighted_ngram_match",
]
