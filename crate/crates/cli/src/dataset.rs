//! Image collections: a root directory with one subdirectory per class.

use std::path::{Path, PathBuf};

use scatter_core::classifier::holdout_split;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Item {
    pub path: PathBuf,
    pub label: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub root: PathBuf,
    /// Subdirectory names, sorted; the position is the class label.
    pub classes: Vec<String>,
    /// Files of each class, sorted by name.
    pub files: Vec<Vec<PathBuf>>,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self> {
        let mut classes = Vec::new();
        for dir in sorted_entries(root)? {
            if dir.is_dir() {
                classes.push(dir);
            }
        }
        if classes.is_empty() {
            return Err(CliError::Data(format!("{} has no class subdirectories", root.display())));
        }
        let mut names = Vec::new();
        let mut files = Vec::new();
        for dir in classes {
            let list: Vec<PathBuf> = sorted_entries(&dir)?.into_iter().filter(|p| p.is_file()).collect();
            names.push(dir.file_name().unwrap_or_default().to_string_lossy().into_owned());
            files.push(list);
        }
        Ok(Dataset {
            root: root.to_path_buf(),
            classes: names,
            files,
        })
    }

    pub fn items(&self) -> Vec<Item> {
        self.files
            .iter()
            .enumerate()
            .flat_map(|(label, list)| {
                list.iter().map(move |p| Item {
                    path: p.clone(),
                    label: Some(label as u32),
                })
            })
            .collect()
    }
}

/// Indices of `train_per_class` training items per class and of the rest,
/// both ascending. Depends only on the seed and the item order.
pub fn split(items: &[Item], train_per_class: usize, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let labels: Vec<u32> = items
        .iter()
        .map(|it| {
            it.label
                .ok_or_else(|| CliError::Usage("a train/test split needs a class-directory dataset".into()))
        })
        .collect::<Result<_>>()?;
    Ok(holdout_split(&labels, train_per_class, seed)?)
}

/// Expands command-line inputs: a single directory is a labeled dataset,
/// otherwise every argument is an image file and the list is sorted.
pub fn collect_inputs(inputs: &[PathBuf]) -> Result<(Vec<Item>, Option<Vec<String>>)> {
    if let [root] = inputs {
        if root.is_dir() {
            let ds = Dataset::open(root)?;
            return Ok((ds.items(), Some(ds.classes)));
        }
    }
    let mut files = inputs.to_vec();
    if let Some(dir) = files.iter().find(|p| p.is_dir()) {
        return Err(CliError::Usage(format!(
            "{} is a directory; pass either one dataset directory or image files",
            dir.display()
        )));
    }
    files.sort();
    Ok((files.into_iter().map(|path| Item { path, label: None }).collect(), None))
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(CliError::io(dir))? {
        let entry = entry.map_err(CliError::io(dir))?;
        if entry.file_name().to_string_lossy().starts_with('.') {
            continue;
        }
        out.push(entry.path());
    }
    out.sort();
    Ok(out)
}
