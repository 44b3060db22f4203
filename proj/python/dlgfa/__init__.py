"""Python interface to the DLGFA C++ core."""

try:
    # installed wheel: the extension lives inside the package
    from ._dlgfa import (
        Dataset,
        DlgfaError,
        Model,
        elbo,
        fit,
        generate_one_bar,
        load,
        load_csv,
        log_likelihood,
        mse,
        prox_columns,
        save_csv,
        split,
    )
except ImportError:
    # development layout: the extension sits on PYTHONPATH next to the build tree
    from _dlgfa import (
        Dataset,
        DlgfaError,
        Model,
        elbo,
        fit,
        generate_one_bar,
        load,
        load_csv,
        log_likelihood,
        mse,
        prox_columns,
        save_csv,
        split,
    )

__version__ = "1.0.0"

__all__ = [
    "Dataset",
    "DlgfaError",
    "Model",
    "elbo",
    "fit",
    "generate_one_bar",
    "load",
    "load_csv",
    "log_likelihood",
    "mse",
    "prox_columns",
    "save_csv",
    "split",
]
