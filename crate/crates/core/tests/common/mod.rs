#![allow(dead_code)]

use std::path::{Path, PathBuf};

use tpl_bench::corpus::{Corpus, LibraryCoordinate, ProjectRecord};

pub const HEAD: [&str; 5] = [
    "junit:junit",
    "org.slf4j:slf4j-api",
    "com.google.guava:guava",
    "org.apache.commons:commons-lang3",
    "com.fasterxml.jackson.core:jackson-databind",
];

pub const PROJECTS: usize = 60;
pub const CLUSTERS: usize = 8;
pub const CLUSTER_SIZE: usize = 5;
pub const SINGLETONS: usize = 6;

pub fn c(s: &str) -> LibraryCoordinate {
    LibraryCoordinate::parse(s).unwrap()
}

pub fn tail(cluster: usize, j: usize) -> String {
    format!("org.niche{cluster}:toolkit-{j}")
}

/// 60 projects. Each uses the five head libraries (project i drops head
/// i%5 when i%4 == 0, so every head library is used by 57 projects), three
/// of the five libraries of its cluster i%8, and six libraries nobody else
/// uses. |L| = 5 + 40 + 360 = 405.
pub fn long_tail_projects() -> Vec<ProjectRecord> {
    (0..PROJECTS)
        .map(|i| {
            let mut deps: Vec<String> = HEAD
                .iter()
                .enumerate()
                .filter(|(h, _)| !(i % 4 == 0 && *h == i % 5))
                .map(|(_, s)| s.to_string())
                .collect();
            let cluster = i % CLUSTERS;
            let skip = [(i / CLUSTERS) % CLUSTER_SIZE, (i / CLUSTERS + 2) % CLUSTER_SIZE];
            deps.extend(
                (0..CLUSTER_SIZE)
                    .filter(|j| !skip.contains(j))
                    .map(|j| tail(cluster, j)),
            );
            deps.extend((0..SINGLETONS).map(|j| format!("io.local.p{i:02}:module-{j}")));
            ProjectRecord::new(format!("project-{i:02}"), deps.iter().map(|d| c(d)))
                .with_description(format!("Service number {i} in product line {cluster}"))
        })
        .collect()
}

pub fn long_tail_corpus() -> Corpus {
    Corpus::new(long_tail_projects()).unwrap()
}

pub fn write_corpus(dir: &Path) -> PathBuf {
    let path = dir.join("data.tsv");
    std::fs::write(&path, long_tail_corpus().to_tabular()).unwrap();
    path
}
