//! Structure identifiers accepted by the CLI and the runner.

use std::fmt;
use std::str::FromStr;

/// Every structure the driver can benchmark. The suffixes mark the window
/// engine (`-c` coupled, `-d` decoupled); the rest are baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructureId {
    StackCoupled,
    StackDecoupled,
    QueueDecoupled,
    DequeDecoupled,
    CounterCoupled,
    CounterDecoupled,
    Treiber,
    MsQueue,
    Faa,
    StackRandom,
    StackRandomC2,
    QueueRandom,
    QueueRandomC2,
    CounterRandom,
    CounterRandomC2,
    StackRobin,
    QueueRobin,
    CounterRobin,
}

impl StructureId {
    pub const ALL: [StructureId; 18] = [
        StructureId::StackCoupled,
        StructureId::StackDecoupled,
        StructureId::QueueDecoupled,
        StructureId::DequeDecoupled,
        StructureId::CounterCoupled,
        StructureId::CounterDecoupled,
        StructureId::Treiber,
        StructureId::MsQueue,
        StructureId::Faa,
        StructureId::StackRandom,
        StructureId::StackRandomC2,
        StructureId::QueueRandom,
        StructureId::QueueRandomC2,
        StructureId::CounterRandom,
        StructureId::CounterRandomC2,
        StructureId::StackRobin,
        StructureId::QueueRobin,
        StructureId::CounterRobin,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StructureId::StackCoupled => "stack-c",
            StructureId::StackDecoupled => "stack-d",
            StructureId::QueueDecoupled => "queue-d",
            StructureId::DequeDecoupled => "deque-d",
            StructureId::CounterCoupled => "counter-c",
            StructureId::CounterDecoupled => "counter-d",
            StructureId::Treiber => "treiber",
            StructureId::MsQueue => "ms-queue",
            StructureId::Faa => "faa",
            StructureId::StackRandom => "stack-random",
            StructureId::StackRandomC2 => "stack-random-c2",
            StructureId::QueueRandom => "queue-random",
            StructureId::QueueRandomC2 => "queue-random-c2",
            StructureId::CounterRandom => "counter-random",
            StructureId::CounterRandomC2 => "counter-random-c2",
            StructureId::StackRobin => "stack-robin",
            StructureId::QueueRobin => "queue-robin",
            StructureId::CounterRobin => "counter-robin",
        }
    }

    /// Windowed structures take width/depth/shift parameters.
    pub fn is_windowed(&self) -> bool {
        matches!(
            self,
            StructureId::StackCoupled
                | StructureId::StackDecoupled
                | StructureId::QueueDecoupled
                | StructureId::DequeDecoupled
                | StructureId::CounterCoupled
                | StructureId::CounterDecoupled
        )
    }

    pub fn is_counter(&self) -> bool {
        matches!(
            self,
            StructureId::CounterCoupled
                | StructureId::CounterDecoupled
                | StructureId::Faa
                | StructureId::CounterRandom
                | StructureId::CounterRandomC2
                | StructureId::CounterRobin
        )
    }

    pub fn is_exact(&self) -> bool {
        matches!(
            self,
            StructureId::Treiber | StructureId::MsQueue | StructureId::Faa
        )
    }
}

impl fmt::Display for StructureId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StructureId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StructureId::ALL
            .iter()
            .find(|id| id.as_str() == s)
            .copied()
            .ok_or_else(|| {
                let known: Vec<&str> = StructureId::ALL.iter().map(|i| i.as_str()).collect();
                format!("unknown structure '{s}'; expected one of {}", known.join(", "))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in StructureId::ALL {
            assert_eq!(id.as_str().parse::<StructureId>(), Ok(id));
        }
        assert!("nope".parse::<StructureId>().is_err());
    }
}
