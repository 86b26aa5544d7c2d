use std::path::Path;
use std::process::Stdio;
use std::time::Duration;

use mmw_core::topology::{
    launch, launch_subset, start_order, validate_topology, LaunchError, LaunchMode, RunningSystem, Topology,
};
use tokio::io::{AsyncBufReadExt, BufReader};
use tokio::process::{Child, Command};

use crate::{base_dir, base_port, load, Failure, Outcome};

const CHILD_START: Duration = Duration::from_secs(15);

fn launch_failure(e: LaunchError) -> Failure {
    match e {
        LaunchError::Invalid(report) => {
            Failure::Rejected(report.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("\n"))
        }
        other => Failure::Runtime(format!("{}: {other}", other.code())),
    }
}

fn announce(t: &Topology, base: u16, ids: &[String]) {
    let plan = t.port_plan(base);
    for id in ids {
        let kind = t
            .kind_of(id)
            .map(|k| format!("{k:?}").to_lowercase())
            .unwrap_or_default();
        println!("ready {id} {kind} 127.0.0.1:{}", plan[id]);
    }
}

async fn stop_requested() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        if let Ok(mut term) = signal(SignalKind::terminate()) {
            tokio::select! {
                _ = tokio::signal::ctrl_c() => {}
                _ = term.recv() => {}
            }
            return;
        }
    }
    let _ = tokio::signal::ctrl_c().await;
}

/// Returns once stdin closes, which is how a supervising parent going away
/// looks from a child.
async fn parent_gone() {
    let mut lines = BufReader::new(tokio::io::stdin()).lines();
    while let Ok(Some(_)) = lines.next_line().await {}
}

async fn hold(system: RunningSystem, supervised: bool) -> Outcome {
    if supervised {
        tokio::select! {
            _ = stop_requested() => {}
            _ = parent_gone() => {}
        }
    } else {
        stop_requested().await;
    }
    system.shutdown().await;
    Ok(())
}

pub async fn serve(file: &Path, multi_process: bool, port: Option<u16>, component: Option<String>) -> Outcome {
    let t = load(file)?;
    let base = base_port(&t, port);
    let mode = LaunchMode::Tcp { base_port: base };
    let dir = base_dir(file);

    if let Some(id) = component {
        let ids = vec![id];
        let system = launch_subset(&t, &dir, mode, &ids).await.map_err(launch_failure)?;
        announce(&t, base, &ids);
        return hold(system, true).await;
    }
    if !multi_process {
        let system = launch(&t, &dir, mode).await.map_err(launch_failure)?;
        announce(&t, base, system.started());
        return hold(system, false).await;
    }

    let report = validate_topology(&t);
    if !report.is_empty() {
        return Err(launch_failure(LaunchError::Invalid(report)));
    }
    let mut children: Vec<(String, Child)> = Vec::new();
    for id in start_order(&t) {
        match spawn_component(file, base, &id).await {
            Ok((child, line)) => {
                println!("{line}");
                children.push((id, child));
            }
            Err(detail) => {
                stop_all(&mut children).await;
                return Err(Failure::Runtime(format!("component-start-failure: `{id}`: {detail}")));
            }
        }
    }

    let lost = tokio::select! {
        _ = stop_requested() => None,
        id = first_exit(&mut children) => Some(id),
    };
    stop_all(&mut children).await;
    match lost {
        None => Ok(()),
        Some(id) => Err(Failure::Runtime(format!("component `{id}` exited"))),
    }
}

async fn spawn_component(file: &Path, base: u16, id: &str) -> Result<(Child, String), String> {
    let exe = std::env::current_exe().map_err(|e| e.to_string())?;
    let mut child = Command::new(exe)
        .arg("serve")
        .arg(file)
        .args(["--base-port", &base.to_string(), "--component", id])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .kill_on_drop(true)
        .spawn()
        .map_err(|e| e.to_string())?;
    let mut lines = BufReader::new(child.stdout.take().expect("stdout is piped")).lines();
    let first = tokio::time::timeout(CHILD_START, lines.next_line()).await;
    match first {
        Ok(Ok(Some(line))) if line.starts_with("ready ") => {
            // Keep draining so the child never blocks on a full pipe.
            tokio::spawn(async move { while let Ok(Some(_)) = lines.next_line().await {} });
            Ok((child, line))
        }
        Ok(Ok(_)) | Ok(Err(_)) => {
            let status = child.wait().await.map_err(|e| e.to_string())?;
            Err(format!("exited before becoming ready ({status})"))
        }
        Err(_) => {
            let _ = child.kill().await;
            Err(format!("not ready after {CHILD_START:?}"))
        }
    }
}

async fn first_exit(children: &mut [(String, Child)]) -> String {
    loop {
        for (id, child) in children.iter_mut() {
            if let Ok(Some(_)) = child.try_wait() {
                return id.clone();
            }
        }
        tokio::time::sleep(Duration::from_millis(200)).await;
    }
}

async fn stop_all(children: &mut Vec<(String, Child)>) {
    while let Some((_, mut child)) = children.pop() {
        let _ = child.kill().await;
    }
}
