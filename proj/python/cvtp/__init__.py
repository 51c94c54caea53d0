"""Correlation-driven centroidal-Voronoi placement of observation gauges."""

from ._core import (  # noqa: F401
    AlphaSelection,
    ComparisonReport,
    Correlogram,
    CvtResult,
    CvtpError,
    DecorrelationDistance,
    DiscreteProblem,
    GeneratorSet,
    Grid,
    InitKind,
    ObservationMatrix,
    PipelineConfig,
    PlacementReport,
    ScalarField,
    SolverKind,
    SolveStatus,
    VariogramFit,
    __version__,
    assign,
    build_density,
    compare_placements,
    correlation_energy,
    correlogram,
    count_below_threshold,
    decorrelation_distance,
    effective_correlation_exhaustive,
    effective_correlation_map,
    energy,
    energy_of_placement,
    fit_exponential_nugget,
    gauge_optim,
    generate_grf,
    init_uniform,
    init_weighted,
    interpolate_field,
    lloyd_solve,
    load_field,
    load_observations,
    pearson,
    render_svg,
    save_field,
    save_observations,
    select_alpha,
    tn_solve,
    write_report,
)
