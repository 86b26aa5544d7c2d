//! Both mask kinds over one mediator: same rows for equivalent queries, and
//! no system-side identifier in anything a mask emits.

mod common;

#[tokio::test]
async fn kinds_agree_and_hide_internal_names() {
    let report = common::mask_suite::run_suite().await.unwrap();
    assert_eq!(report.queries, 20);
    assert_eq!(report.errors, 4);
}
