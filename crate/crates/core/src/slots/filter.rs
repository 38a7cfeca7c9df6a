use std::collections::BTreeSet;

use super::{GlobalSlot, SlotId, DELETE_EXIST_COUNT, STABILIZE_OBS_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterAction {
    Stabilize(SlotId),
    Delete(SlotId),
    Keep(SlotId),
}

/// One keyframe of the unstable-slot filter. Counters are advanced in place and a
/// stabilized slot is flagged `stable`; deletion is left to the caller. Stable slots
/// passed in are skipped.
pub fn filter_step<'a>(
    unstable: impl IntoIterator<Item = &'a mut GlobalSlot>,
    observed: &BTreeSet<SlotId>,
) -> Vec<FilterAction> {
    let mut actions = Vec::new();
    for slot in unstable {
        if slot.stable {
            continue;
        }
        slot.exist_count += 1;
        if observed.contains(&slot.id) {
            slot.obs_count += 1;
        }
        let action = if slot.obs_count > STABILIZE_OBS_COUNT {
            slot.stable = true;
            FilterAction::Stabilize(slot.id)
        } else if slot.exist_count > DELETE_EXIST_COUNT {
            FilterAction::Delete(slot.id)
        } else {
            FilterAction::Keep(slot.id)
        };
        actions.push(action);
    }
    actions
}
