use super::{WindowRef, WindowSample};

/// Anything positioned on the grid by its forecast issue index.
pub trait WindowSpan {
    fn issue_index(&self) -> usize;
}

impl WindowSpan for WindowSample {
    fn issue_index(&self) -> usize {
        self.issue_index
    }
}

impl WindowSpan for WindowRef {
    fn issue_index(&self) -> usize {
        self.issue_index
    }
}

/// Grid indices where the validation and test partitions begin.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChronoCutoffs {
    pub validation_start: usize,
    pub test_start: usize,
}

impl ChronoCutoffs {
    /// Test = final `test_fraction` of the grid; validation = final
    /// `val_fraction` of what precedes it.
    pub fn from_fractions(len: usize, val_fraction: f64, test_fraction: f64) -> Self {
        let test_start = len - ((len as f64 * test_fraction).round() as usize).min(len);
        let validation_start =
            test_start - ((test_start as f64 * val_fraction).round() as usize).min(test_start);
        ChronoCutoffs {
            validation_start,
            test_start,
        }
    }
}

#[derive(Debug)]
pub struct Split<W> {
    pub train: Vec<W>,
    pub validation: Vec<W>,
    pub test: Vec<W>,
    /// Earlier-partition windows whose span reaches the target range of a
    /// later-partition window.
    pub purged: Vec<W>,
}

impl<W> Split<W> {
    pub fn total(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len() + self.purged.len()
    }
}

/// Assigns each window by the last grid index it touches: a window goes to the
/// latest partition whose cutoff its span reaches, so a target range that
/// crosses a cutoff lands in the later partition. Earlier windows that touch
/// any later window's target range are moved to `purged`.
pub fn chrono_split<W: WindowSpan>(
    windows: Vec<W>,
    horizon: usize,
    cutoffs: ChronoCutoffs,
) -> Split<W> {
    let mut split = Split {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        purged: Vec::new(),
    };
    let last_touched = |w: &W| w.issue_index() + horizon;
    for w in windows {
        let end = last_touched(&w);
        if end >= cutoffs.test_start {
            split.test.push(w);
        } else if end >= cutoffs.validation_start {
            split.validation.push(w);
        } else {
            split.train.push(w);
        }
    }
    let first_target = |ws: &[W]| ws.iter().map(|w| w.issue_index() + 1).min();

    if let Some(test_begin) = first_target(&split.test) {
        let (keep, drop): (Vec<W>, Vec<W>) = split
            .validation
            .into_iter()
            .partition(|w| last_touched(w) < test_begin);
        split.validation = keep;
        split.purged.extend(drop);
    }
    let later_begin = [first_target(&split.validation), first_target(&split.test)]
        .into_iter()
        .flatten()
        .min();
    if let Some(begin) = later_begin {
        let (keep, drop): (Vec<W>, Vec<W>) = split
            .train
            .into_iter()
            .partition(|w| last_touched(w) < begin);
        split.train = keep;
        split.purged.extend(drop);
    }
    split
}
