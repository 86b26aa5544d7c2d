//! The three-store replica: every mask answers schema and query requests,
//! with rows checked against data read straight from the fixture files.

mod common;

#[tokio::test]
async fn all_masks_answer() {
    common::sos::check_replica().await.unwrap();
}
