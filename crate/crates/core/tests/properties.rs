mod props;

#[test]
fn odd_products_are_graded_exhaustively() {
    props::odd_products_are_graded_exhaustively();
}

#[test]
fn parity_of_products_exhaustive() {
    props::parity_of_products_exhaustive();
}

#[test]
fn random_odd_monomials_anticommute() {
    props::random_odd_monomials_anticommute();
}

#[test]
fn canonical_form_agrees_with_oracle() {
    props::canonical_form_agrees_with_oracle();
}

#[test]
fn canonicalization_is_idempotent() {
    props::canonicalization_is_idempotent();
}

#[test]
fn ring_laws() {
    props::ring_laws();
}

#[test]
fn leibniz_rule() {
    props::leibniz_rule();
}

#[test]
fn mixed_partials_commute() {
    props::mixed_partials_commute();
}

#[test]
fn odd_partial_is_a_graded_derivation() {
    props::odd_partial_is_a_graded_derivation();
}

#[test]
fn total_derivatives_are_null_lagrangians() {
    props::total_derivatives_are_null_lagrangians();
}

#[test]
fn series_reconstructs_laurent_polynomials() {
    props::series_reconstructs_laurent_polynomials();
}

#[test]
fn chart_change_round_trip() {
    props::chart_change_round_trip();
}

#[test]
fn nilpotent_roots_square_back() {
    props::nilpotent_roots_square_back();
}
