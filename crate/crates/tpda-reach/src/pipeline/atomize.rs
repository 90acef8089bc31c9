use crate::tpda::Tpda;
use crate::Result;

use super::StageOutput;

pub fn atomize_pops(_p: &Tpda) -> Result<StageOutput> {
    unimplemented!()
}
