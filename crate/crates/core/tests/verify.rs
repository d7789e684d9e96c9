use forest_escape::acceptance::run_suite;
use forest_escape::Catalog;

#[test]
fn corrupted_point_radius_fails_the_point_checks() {
    let mut catalog = Catalog::standard();
    catalog.set_param("point_unit", "radius", 1.05).unwrap();
    let outcomes = run_suite(&catalog, Some("12"), |_| {}).unwrap();
    assert_eq!(outcomes.len(), 1);
    assert!(!outcomes[0].passed, "{}", outcomes[0]);

    let clean = run_suite(&Catalog::standard(), Some("12"), |_| {}).unwrap();
    assert!(clean[0].passed, "{}", clean[0]);
}

#[test]
fn scenario_filter_selects_every_check_that_uses_it() {
    let outcomes = run_suite(&Catalog::standard(), Some("point_unit"), |_| {}).unwrap();
    let ids: Vec<usize> = outcomes.iter().map(|o| o.id).collect();
    assert!(ids.contains(&2) && ids.contains(&12), "{ids:?}");
}
