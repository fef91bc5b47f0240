from .plots import (PENALTY_FLOOR, plot_convexity, plot_density,
                    plot_image_grid, plot_surface, read_penalty_series)

__all__ = ["PENALTY_FLOOR", "plot_convexity", "plot_density",
           "plot_image_grid", "plot_surface", "read_penalty_series"]
