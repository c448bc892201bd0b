# Report layouts shared by the suites, calibration and the CLI printers

NARRATIVE_HEADER = """Suite {suite}: {passed}/{total} assertions passed
"""

NARRATIVE_STEP = "{index:>3}. [{status}] {description} {details}"

# Stable CSV columns; one row per corpus item or sweep point
CSV_COLUMNS = {
    "rwt": ["dim", "family", "seed", "measure_first", "measure_second", "incidence", "epsilon"],
    "prop15": ["dim", "draw", "rho", "epsilon", "alpha", "alpha_star"],
    "cover": ["dim", "delta", "count", "coverage", "eta"],
    "symmetry": ["dim", "kind", "residual", "epsilon_before", "epsilon_after", "relative_change"],
    "tower": ["dim", "draw", "built", "omega1_over_alpha", "fiber_over_alpha_star", "phi_ratio", "inclusions_ok"],
    "slicing": ["dim", "draw", "lhs", "rhs", "ratio"],
    "convexify": ["case", "measure_set", "measure_convex", "exclusion_constant", "steps", "verified"],
    "detmoment": ["case", "dim", "estimate", "stderr", "bound", "normalized", "ok", "hypothesis_ok"],
    "trilinear": ["dim", "draw", "lhs", "rhs", "ratio", "hypothesis_ok"],
    "lorentz": ["dim", "draw", "flatness", "ratio", "norm_f", "norm_fstar"],
    "extract": ["dim", "case", "rho", "first_measure_ratio", "second_measure_ratio", "retention", "epsilon"],
    "lambda0": ["dim", "family", "n_centers", "t", "t_star", "pairing", "reference", "ratio", "epsilon"],
}

CSV_DOCUMENTATION = """Columns of the per-suite CSV reports
  dim                  ambient dimension d
  family / case / kind generator family, named test case or symmetry generator
  seed / draw          corpus seed or draw index
  epsilon              𝒯(E,E★) / (|E||E★|)^(d/(d+1))
  alpha, alpha_star    𝒯/|E| and 𝒯/|E★|
  ratio                left side over right side of the inequality under test
  retention            incidence kept inside the recovered envelopes
  normalized           det-moment estimate over δ^n λ^n |𝒞|
  t, t_star, pairing   |E|, |E★| and the localized pairing ⟨T₀χ_E★, χ_E⟩
"""

SUITE_SUMMARY = """{suite}: {status} ({passed}/{total} assertions, {rows} rows, {seconds:.1f}s)"""
