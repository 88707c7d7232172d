//! Warnings raised during a run, mirrored to the logger and collected per thread
//! so a stage can list them in its manifest.

use std::cell::RefCell;

thread_local! {
    static SINK: RefCell<Option<Vec<String>>> = const { RefCell::new(None) };
}

/// Logs `msg` and records it if the current thread is capturing.
pub fn warn(msg: impl Into<String>) {
    let msg = msg.into();
    log::warn!("{msg}");
    SINK.with(|s| {
        if let Some(v) = s.borrow_mut().as_mut() {
            v.push(msg);
        }
    });
}

/// Runs `f` and returns its value with the warnings it raised on this thread.
pub fn capture<R>(f: impl FnOnce() -> R) -> (R, Vec<String>) {
    let outer = SINK.with(|s| s.borrow_mut().replace(Vec::new()));
    let r = f();
    let caught = SINK.with(|s| std::mem::replace(&mut *s.borrow_mut(), outer)).unwrap_or_default();
    if !caught.is_empty() {
        SINK.with(|s| {
            if let Some(v) = s.borrow_mut().as_mut() {
                v.extend(caught.iter().cloned());
            }
        });
    }
    (r, caught)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_capture_propagates_outward() {
        let ((_, inner), outer) = capture(|| {
            warn("a");
            capture(|| warn("b"))
        });
        assert_eq!(inner, vec!["b".to_string()]);
        assert_eq!(outer, vec!["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn uncaptured_warnings_are_dropped() {
        warn("nobody listens");
        let (_, w) = capture(|| ());
        assert!(w.is_empty());
    }
}
