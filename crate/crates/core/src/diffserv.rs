//! Strict-priority composition of per-class queues.
//!
//! Class 0 is served first. At each opportunity only the highest-priority
//! non-empty class is dequeued; lower classes are not touched. A
//! single-discipline bottleneck is simply one class.

use crate::aqm::{
    DequeueResult, Discipline, DisciplineSpec, EnqueueResult, QueueDiscipline, SimRng,
};
use crate::error::{Error, Result};
use crate::packet::{ClassId, Packet};
use crate::time::SimTime;

#[derive(Clone, Debug, PartialEq)]
pub struct ClassConfig {
    pub discipline: DisciplineSpec,
    /// Reported only: each summary row says whether the class met it.
    pub delay_requirement: Option<SimTime>,
}

impl ClassConfig {
    pub fn new(discipline: DisciplineSpec) -> Self {
        ClassConfig {
            discipline,
            delay_requirement: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct PriorityScheduler {
    classes: Vec<Discipline>,
}

impl PriorityScheduler {
    pub fn new(classes: Vec<Discipline>) -> Result<Self> {
        if classes.is_empty() {
            return Err(Error::Validation("at least one class is required".into()));
        }
        Ok(PriorityScheduler { classes })
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn class(&self, class: ClassId) -> &Discipline {
        &self.classes[class]
    }

    pub fn classes(&self) -> &[Discipline] {
        &self.classes
    }

    /// Class of `packet`, as tagged by its source.
    pub fn classify(&self, packet: &Packet) -> Result<ClassId> {
        if packet.class_id < self.classes.len() {
            Ok(packet.class_id)
        } else {
            Err(Error::UnknownClass {
                class: packet.class_id,
                configured: self.classes.len(),
            })
        }
    }

    pub fn enqueue(
        &mut self,
        packet: Packet,
        now: SimTime,
        rng: &mut SimRng,
    ) -> Result<EnqueueResult> {
        let class = self.classify(&packet)?;
        Ok(self.classes[class].enqueue(packet, now, rng))
    }

    /// Dequeues from the highest-priority non-empty class. Returns the class
    /// that was dequeued, or `None` when every class is empty.
    pub fn priority_dequeue(&mut self, now: SimTime) -> (Option<ClassId>, DequeueResult) {
        match self.classes.iter().position(|c| !c.is_empty()) {
            Some(k) => (Some(k), self.classes[k].dequeue(now)),
            None => (None, DequeueResult::default()),
        }
    }

    pub fn len(&self) -> usize {
        self.classes.iter().map(|c| c.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.iter().all(|c| c.is_empty())
    }
}
