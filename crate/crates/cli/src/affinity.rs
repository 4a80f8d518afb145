//! Best-effort CPU pinning for benchmark workers. `compact` packs workers
//! onto consecutive cores; `scatter` strides them across the online set,
//! approximating a round-robin spread over packages. Unsupported platforms
//! (or failed syscalls) degrade to no pinning with a one-time warning.

use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Affinity {
    #[default]
    None,
    Compact,
    Scatter,
}

impl FromStr for Affinity {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(Affinity::None),
            "compact" => Ok(Affinity::Compact),
            "scatter" => Ok(Affinity::Scatter),
            other => Err(format!(
                "unknown affinity '{other}'; expected none, compact or scatter"
            )),
        }
    }
}

static WARNED: AtomicBool = AtomicBool::new(false);

fn warn_once(reason: &str) {
    if !WARNED.swap(true, Ordering::Relaxed) {
        eprintln!("warning: thread pinning unavailable ({reason}); continuing unpinned");
    }
}

/// Pins the calling thread according to the policy.
pub fn pin_current(policy: Affinity, worker: usize, total_workers: usize) {
    if policy == Affinity::None {
        return;
    }
    #[cfg(target_os = "linux")]
    {
        let cores = online_cpus();
        if cores == 0 {
            warn_once("cpu count unknown");
            return;
        }
        let core = match policy {
            Affinity::Compact => worker % cores,
            Affinity::Scatter => {
                let stride = (cores / total_workers.max(1)).max(1);
                (worker * stride) % cores
            }
            Affinity::None => unreachable!(),
        };
        unsafe {
            let mut set: libc::cpu_set_t = std::mem::zeroed();
            libc::CPU_SET(core, &mut set);
            let rc = libc::sched_setaffinity(
                0,
                std::mem::size_of::<libc::cpu_set_t>(),
                &set,
            );
            if rc != 0 {
                warn_once("sched_setaffinity failed");
            }
        }
    }
    #[cfg(not(target_os = "linux"))]
    {
        let _ = (worker, total_workers);
        warn_once("unsupported platform");
    }
}

#[cfg(target_os = "linux")]
fn online_cpus() -> usize {
    let n = unsafe { libc::sysconf(libc::_SC_NPROCESSORS_ONLN) };
    if n > 0 {
        n as usize
    } else {
        0
    }
}
