"""Typed list-manipulating language with learned components.

Programs mix exact operations (arithmetic, comparisons, fold/map/filter/
slice/length) with model-backed components that may abstain at test time.
This package holds the language itself (lang, syntax), its evaluation
modes (eval), synthetic predictor data (data, values), and the lowering
onto the core calibration machinery (lowering).
"""
from .values import BOT, Bot, ImageRecord, ImageVal, Prediction, is_bot
from .lang import (
    ANNOTATED,
    BOOL,
    COMPONENT_TYPES,
    FLOAT,
    IMAGE,
    INT,
    App,
    Arrow,
    Comp,
    DslType,
    Filter,
    FloatLit,
    Fold,
    Input,
    IntLit,
    Length,
    ListT,
    Map,
    Program,
    Slice,
    ToFloat,
    TypeError_,
    annotated_occurrences,
    comp,
    elaborate,
    infer_type,
    occurrence_labels,
    type_from_str,
    type_to_str,
)
from .syntax import (
    SCHEMA_PROGRAM,
    parse_program,
    print_program,
    program_from_json,
    program_to_json,
)
from .eval import (
    HoleAssignment,
    LengthMismatch,
    ProfileResult,
    compile_program,
    dsl_eval,
    dsl_output_error,
    infer_signature,
    make_evaluator,
    max_list_length,
    permissive_fill,
    profile_dataset,
)
from .data import (
    PredictorConfig,
    TaskDataConfig,
    example_image,
    examples_from_jsonl,
    examples_to_jsonl,
    image_input,
    list_input,
    make_task_data,
    records_from_jsonl,
    records_to_jsonl,
    synth_predictor,
    value_from_json,
    value_to_json,
)
from .lowering import (
    DslSketchReport,
    LoweredSketch,
    length_bound,
    lower_to_sketch_ir,
    lower_valuations,
    sketch_via_ir,
    unroll_occurrences,
)

__all__ = [
    "BOT",
    "Bot",
    "ImageRecord",
    "ImageVal",
    "Prediction",
    "is_bot",
    "ANNOTATED",
    "BOOL",
    "COMPONENT_TYPES",
    "FLOAT",
    "IMAGE",
    "INT",
    "App",
    "Arrow",
    "Comp",
    "DslType",
    "Filter",
    "FloatLit",
    "Fold",
    "Input",
    "IntLit",
    "Length",
    "ListT",
    "Map",
    "Program",
    "Slice",
    "ToFloat",
    "TypeError_",
    "annotated_occurrences",
    "comp",
    "elaborate",
    "infer_type",
    "occurrence_labels",
    "type_from_str",
    "type_to_str",
    "SCHEMA_PROGRAM",
    "parse_program",
    "print_program",
    "program_from_json",
    "program_to_json",
    "HoleAssignment",
    "LengthMismatch",
    "ProfileResult",
    "compile_program",
    "dsl_eval",
    "dsl_output_error",
    "infer_signature",
    "make_evaluator",
    "max_list_length",
    "permissive_fill",
    "profile_dataset",
    "PredictorConfig",
    "TaskDataConfig",
    "example_image",
    "examples_from_jsonl",
    "examples_to_jsonl",
    "image_input",
    "list_input",
    "make_task_data",
    "records_from_jsonl",
    "records_to_jsonl",
    "synth_predictor",
    "value_from_json",
    "value_to_json",
    "DslSketchReport",
    "LoweredSketch",
    "length_bound",
    "lower_to_sketch_ir",
    "lower_valuations",
    "sketch_via_ir",
    "unroll_occurrences",
]
