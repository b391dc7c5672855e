from .system import prepare_out_dir, seed_everything, system_specs

__all__ = ["prepare_out_dir", "seed_everything", "system_specs"]
