use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Stacks `a` and `b` along the channel axis, `a` first.
pub fn concat_channels<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    const OP: &str = "concat_channels";
    let (da, db) = (a.dims(), b.dims());
    if da.n != db.n {
        return Err(Error::shape(OP, "batch", da.n, db.n));
    }
    if da.h != db.h {
        return Err(Error::shape(OP, "height", da.h, db.h));
    }
    if da.w != db.w {
        return Err(Error::shape(OP, "width", da.w, db.w));
    }
    let (sa, sb) = (a.item(0).len(), b.item(0).len());
    let mut data = alloc::vec::Vec::with_capacity(a.len() + b.len());
    for n in 0..da.n {
        data.extend_from_slice(&a.data()[n * sa..(n + 1) * sa]);
        data.extend_from_slice(&b.data()[n * sb..(n + 1) * sb]);
    }
    Tensor::from_vec([da.n, da.c + db.c, da.h, da.w], data)
}

/// Inverse of [`concat_channels`]: the first `channels_a` channels, then the rest.
pub fn split_channels<T: Scalar>(
    t: &Tensor<T>,
    channels_a: usize,
) -> Result<(Tensor<T>, Tensor<T>)> {
    let d = t.dims();
    if channels_a > d.c {
        return Err(Error::shape("split_channels", "channel", d.c, channels_a));
    }
    let plane = d.plane();
    let (sa, sb) = (channels_a * plane, (d.c - channels_a) * plane);
    let mut a = alloc::vec::Vec::with_capacity(d.n * sa);
    let mut b = alloc::vec::Vec::with_capacity(d.n * sb);
    for n in 0..d.n {
        let item = &t.data()[n * (sa + sb)..(n + 1) * (sa + sb)];
        a.extend_from_slice(&item[..sa]);
        b.extend_from_slice(&item[sa..]);
    }
    Ok((
        Tensor::from_vec([d.n, channels_a, d.h, d.w], a)?,
        Tensor::from_vec([d.n, d.c - channels_a, d.h, d.w], b)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Dims;

    #[test]
    fn concat_then_split_roundtrips() {
        let a = Tensor::<f32>::from_fn([2, 2, 4, 4], |n, c, y, x| {
            (n * 100 + c * 16 + y * 4 + x) as f32
        });
        let b = Tensor::<f32>::from_fn([2, 3, 4, 4], |n, c, y, x| {
            -((n * 100 + c * 16 + y * 4 + x) as f32)
        });
        let ab = concat_channels(&a, &b).unwrap();
        assert_eq!(ab.dims(), Dims::new(2, 5, 4, 4));
        assert_eq!(ab.at(1, 1, 2, 3), a.at(1, 1, 2, 3));
        assert_eq!(ab.at(1, 4, 2, 3), b.at(1, 2, 2, 3));
        let (a2, b2) = split_channels(&ab, 2).unwrap();
        assert_eq!((a2, b2), (a, b));
    }

    #[test]
    fn skip_concat_width() {
        let a = Tensor::<f32>::zeros([1, 512, 40, 40]);
        assert_eq!(
            concat_channels(&a, &a).unwrap().dims(),
            Dims::new(1, 1024, 40, 40)
        );
    }

    #[test]
    fn spatial_mismatch_rejected() {
        let a = Tensor::<f32>::zeros([1, 2, 4, 4]);
        let b = Tensor::<f32>::zeros([1, 2, 4, 8]);
        assert!(concat_channels(&a, &b).is_err());
    }
}
