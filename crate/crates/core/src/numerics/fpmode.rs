//! Scoped flush-to-zero for SSE arithmetic.
//!
//! Subnormal operands cost up to ~100x per instruction on x86. Training
//! produces them routinely (saturated sigmoids, decaying optimizer moments),
//! so training and inference run with FTZ/DAZ set. The previous control word
//! is restored on drop. Other targets are unaffected.

#[cfg(target_arch = "x86_64")]
const FTZ_DAZ: u32 = 0x8040;

pub struct FlushToZero {
    #[cfg(target_arch = "x86_64")]
    saved: u32,
}

impl FlushToZero {
    #[cfg(target_arch = "x86_64")]
    pub fn enable() -> Self {
        let mut saved: u32 = 0;
        // SAFETY: stmxcsr/ldmxcsr only read and write the SSE control word of
        // the current thread; the value written differs from the saved one
        // only in the FTZ and DAZ bits.
        unsafe {
            std::arch::asm!("stmxcsr [{}]", in(reg) &mut saved, options(nostack, preserves_flags));
            let csr = saved | FTZ_DAZ;
            std::arch::asm!("ldmxcsr [{}]", in(reg) &csr, options(nostack, preserves_flags, readonly));
        }
        FlushToZero { saved }
    }

    #[cfg(not(target_arch = "x86_64"))]
    pub fn enable() -> Self {
        FlushToZero {}
    }
}

impl Drop for FlushToZero {
    fn drop(&mut self) {
        #[cfg(target_arch = "x86_64")]
        // SAFETY: restores the control word saved in `enable`.
        unsafe {
            std::arch::asm!("ldmxcsr [{}]", in(reg) &self.saved, options(nostack, preserves_flags, readonly));
        }
    }
}
