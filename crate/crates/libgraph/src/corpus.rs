//! Bundled application Kconfig trees.

use crate::parse::MemLoader;

/// One corpus member: a Kconfig tree and its objective.
#[derive(Debug, Clone)]
pub struct CorpusTree {
    pub name: &'static str,
    pub objective: &'static str,
    pub files: &'static [(&'static str, &'static str)],
}

impl CorpusTree {
    pub fn loader(&self) -> MemLoader {
        let mut l = MemLoader::new();
        for (path, text) in self.files {
            l.insert(*path, *text);
        }
        l
    }
}

macro_rules! tree {
    ($name:literal, $objective:literal, [$($path:literal),* $(,)?]) => {
        CorpusTree {
            name: $name,
            objective: $objective,
            files: &[$(($path, include_str!(concat!("../corpus/", $name, "/", $path)))),*],
        }
    };
}

pub static TREES: &[CorpusTree] = &[
    tree!(
        "helloworld",
        "minimal hello world image that should minimize memory footprint",
        ["Kconfig", "app/Kconfig", "lib/sched/Kconfig", "lib/timer/Kconfig", "lib/alloc/Kconfig"]
    ),
    tree!(
        "httpreply",
        "minimize memory consumption for lightweight IoT services",
        ["Kconfig", "app/Kconfig", "lib/sched/Kconfig", "lib/timer/Kconfig", "lib/alloc/Kconfig", "lib/net/Kconfig", "lib/virtio/Kconfig"]
    ),
    tree!(
        "nginx",
        "multicore web server with high throughput",
        ["Kconfig", "app/Kconfig", "lib/sched/Kconfig", "lib/timer/Kconfig", "lib/alloc/Kconfig", "lib/net/Kconfig", "lib/virtio/Kconfig", "lib/fs/Kconfig", "lib/log/Kconfig"]
    ),
    tree!(
        "redis",
        "key value store serving clients over the tcp network",
        ["Kconfig", "app/Kconfig", "lib/sched/Kconfig", "lib/alloc/Kconfig", "lib/net/Kconfig", "lib/virtio/Kconfig", "lib/timer/Kconfig"]
    ),
    tree!(
        "sqlite",
        "embedded database with persistent storage and small footprint",
        ["Kconfig", "app/Kconfig", "lib/alloc/Kconfig", "lib/fs/Kconfig", "lib/ipc/Kconfig"]
    ),
    tree!(
        "python",
        "scripting runtime with filesystem modules and performance",
        ["Kconfig", "app/Kconfig", "lib/sched/Kconfig", "lib/alloc/Kconfig", "lib/fs/Kconfig", "lib/script/Kconfig", "lib/log/Kconfig", "lib/timer/Kconfig"]
    ),
    tree!(
        "lua",
        "lightweight scripting interpreter with low latency garbage collection",
        ["Kconfig", "app/Kconfig", "lib/alloc/Kconfig", "lib/script/Kconfig", "lib/fs/Kconfig"]
    ),
    tree!(
        "memcached",
        "network cache service with multicore performance",
        ["Kconfig", "app/Kconfig", "lib/sched/Kconfig", "lib/alloc/Kconfig", "lib/net/Kconfig", "lib/virtio/Kconfig", "lib/log/Kconfig", "lib/timer/Kconfig"]
    ),
    tree!(
        "iperf",
        "network throughput measurement over tcp",
        ["Kconfig", "app/Kconfig", "lib/sched/Kconfig", "lib/alloc/Kconfig", "lib/net/Kconfig", "lib/virtio/Kconfig", "lib/timer/Kconfig"]
    ),
    tree!(
        "mqtt-client",
        "mqtt telemetry client on battery power",
        ["Kconfig", "app/Kconfig", "lib/sched/Kconfig", "lib/timer/Kconfig", "lib/alloc/Kconfig", "lib/net/Kconfig", "lib/crypto/Kconfig", "lib/tls/Kconfig", "lib/virtio/Kconfig"]
    ),
    tree!(
        "motor-control",
        "real-time control loop with deterministic latency, SMP=n",
        ["Kconfig", "app/Kconfig", "lib/sched/Kconfig", "lib/timer/Kconfig", "lib/ipc/Kconfig"]
    ),
    tree!(
        "sensor-hub",
        "low power sensor sampling with small memory footprint",
        ["Kconfig", "app/Kconfig", "lib/timer/Kconfig", "lib/alloc/Kconfig", "lib/log/Kconfig"]
    ),
    tree!(
        "tls-gateway",
        "hardened tls gateway with strong isolation and security",
        ["Kconfig", "app/Kconfig", "lib/sched/Kconfig", "lib/alloc/Kconfig", "lib/net/Kconfig", "lib/crypto/Kconfig", "lib/tls/Kconfig", "lib/virtio/Kconfig", "lib/log/Kconfig", "lib/timer/Kconfig"]
    ),
    tree!(
        "ota-updater",
        "secure firmware updates written to persistent storage",
        ["Kconfig", "app/Kconfig", "lib/alloc/Kconfig", "lib/fs/Kconfig", "lib/crypto/Kconfig", "lib/ipc/Kconfig"]
    ),
];

pub fn get(name: &str) -> Option<&'static CorpusTree> {
    TREES.iter().find(|t| t.name == name)
}
