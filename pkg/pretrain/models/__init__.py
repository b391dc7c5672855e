from .enums import AblationAxis, MaskFill, MaskStrategy, ScanOrder, TokiVariant

# run_config is imported by path: it depends on masking, which depends on the enums.
__all__ = [
    "AblationAxis",
    "MaskFill",
    "MaskStrategy",
    "ScanOrder",
    "TokiVariant",
]
