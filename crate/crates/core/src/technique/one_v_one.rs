use super::{TechniqueError, TechniqueName};
use crate::cluster::{kmeans_fit, sq_dist, KMeansModel};
use crate::pose::{extent, NUM_JOINTS};
use crate::scaler::ZScaler;
use crate::view::NormalizedPose;
use serde::{Deserialize, Serialize};

/// Flattened 2D pose (32 values) followed by GKEM.
pub const FEATURE_LEN: usize = 2 * NUM_JOINTS + 1;
pub const GKEM_INDEX: usize = FEATURE_LEN - 1;
pub const TECHNIQUE_CLUSTERS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct OneVOneFeature(Vec<f64>);

impl OneVOneFeature {
    pub fn new(values: Vec<f64>) -> Result<Self, TechniqueError> {
        if values.len() != FEATURE_LEN {
            return Err(TechniqueError::FeatureLength {
                expected: FEATURE_LEN,
                found: values.len(),
            });
        }
        Ok(OneVOneFeature(values))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn gkem(&self) -> f64 {
        self.0[GKEM_INDEX]
    }

    fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.0[..GKEM_INDEX].iter().step_by(2).copied()
    }

    fn ys(&self) -> impl Iterator<Item = f64> + '_ {
        self.0[1..GKEM_INDEX].iter().step_by(2).copied()
    }

    pub fn pose_width(&self) -> f64 {
        extent(self.xs())
    }

    pub fn pose_height(&self) -> f64 {
        extent(self.ys())
    }
}

pub fn build_1v1_feature(
    norm: &NormalizedPose,
    gkem_value: f64,
    scaler: Option<&ZScaler>,
) -> Result<OneVOneFeature, TechniqueError> {
    if !(gkem_value >= 0.0) || !gkem_value.is_finite() {
        return Err(TechniqueError::InvalidGkem(gkem_value));
    }
    let mut values = norm.pose.centered().project_xy().flatten();
    values.push(gkem_value);
    if let Some(s) = scaler {
        values = s.transform(&values);
    }
    OneVOneFeature::new(values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TechniqueModel {
    pub kmeans: KMeansModel,
    /// Technique for each cluster label.
    pub name_map: [TechniqueName; TECHNIQUE_CLUSTERS],
    /// Absent when clustering ran on unscaled features.
    pub scaler: Option<ZScaler>,
}

impl TechniqueModel {
    fn project(&self, f: &OneVOneFeature) -> Vec<f64> {
        match &self.scaler {
            Some(s) => s.transform(f.values()),
            None => f.values().to_vec(),
        }
    }

    pub fn label(&self, f: &OneVOneFeature) -> Result<usize, TechniqueError> {
        Ok(self.kmeans.assign(&self.project(f))?)
    }

    pub fn classify(&self, f: &OneVOneFeature) -> Result<TechniqueName, TechniqueError> {
        Ok(self.name_map[self.label(f)?])
    }

    pub fn label_of(&self, t: TechniqueName) -> usize {
        self.name_map
            .iter()
            .position(|&n| n == t)
            .expect("name_map is a bijection")
    }
}

/// Clusters raw (unscaled) 1v1 features into four techniques and names them.
///
/// Naming: the two clusters with the tallest mean pose are the sets, the
/// lower-GKEM one aggressive; of the other two the wider is spread.
pub fn fit_technique_model(
    features: &[OneVOneFeature],
    seed: u64,
    scale: bool,
) -> Result<TechniqueModel, TechniqueError> {
    if features.len() < TECHNIQUE_CLUSTERS {
        return Err(TechniqueError::TooFewPoints {
            needed: TECHNIQUE_CLUSTERS,
            found: features.len(),
        });
    }
    let raw: Vec<Vec<f64>> = features.iter().map(|f| f.values().to_vec()).collect();
    let scaler = scale.then(|| ZScaler::fit(&raw));
    let space = match &scaler {
        Some(s) => s.transform_all(&raw),
        None => raw,
    };
    let kmeans = kmeans_fit(&space, TECHNIQUE_CLUSTERS, seed)?;
    let labels = kmeans.labels(&space)?;
    let name_map = name_clusters(features, &labels);
    Ok(TechniqueModel {
        kmeans,
        name_map,
        scaler,
    })
}

#[derive(Debug, Clone, Copy, Default)]
struct ClusterProfile {
    count: usize,
    height: f64,
    width: f64,
    gkem: f64,
}

fn name_clusters(features: &[OneVOneFeature], labels: &[usize]) -> [TechniqueName; 4] {
    let mut prof = [ClusterProfile::default(); TECHNIQUE_CLUSTERS];
    for (f, &l) in features.iter().zip(labels) {
        let p = &mut prof[l];
        p.count += 1;
        p.height += f.pose_height();
        p.width += f.pose_width();
        p.gkem += f.gkem();
    }
    for p in prof.iter_mut() {
        let n = p.count.max(1) as f64;
        p.height /= n;
        p.width /= n;
        p.gkem /= n;
    }
    let mut by_height: Vec<usize> = (0..TECHNIQUE_CLUSTERS).collect();
    by_height.sort_by(|&a, &b| prof[b].height.total_cmp(&prof[a].height).then(a.cmp(&b)));
    let (mut sets, mut rest) = ([by_height[0], by_height[1]], [by_height[2], by_height[3]]);
    sets.sort_by(|&a, &b| prof[a].gkem.total_cmp(&prof[b].gkem).then(a.cmp(&b)));
    rest.sort_by(|&a, &b| prof[b].width.total_cmp(&prof[a].width).then(a.cmp(&b)));

    let mut map = [TechniqueName::AggressiveSet; TECHNIQUE_CLUSTERS];
    map[sets[0]] = TechniqueName::AggressiveSet;
    map[sets[1]] = TechniqueName::PassiveSet;
    map[rest[0]] = TechniqueName::Spread;
    map[rest[1]] = TechniqueName::Smother;
    map
}

/// For each cluster centre, the key of the nearest feature (Euclidean, in
/// the model's clustering space). Ties go to the smallest key.
pub fn representative_saves<K: Ord + Clone>(
    model: &TechniqueModel,
    features: &[(K, OneVOneFeature)],
) -> Result<Vec<K>, TechniqueError> {
    if features.is_empty() {
        return Err(TechniqueError::TooFewPoints {
            needed: 1,
            found: 0,
        });
    }
    let projected: Vec<(&K, Vec<f64>)> = features
        .iter()
        .map(|(k, f)| (k, model.project(f)))
        .collect();
    let mut out = Vec::with_capacity(model.kmeans.k);
    for center in &model.kmeans.centers {
        let (key, _) = projected
            .iter()
            .map(|(k, v)| (*k, sq_dist(center, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)))
            .expect("non-empty");
        out.push(key.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pose::{validate_pose, JointId};
    use crate::synthetic::archetype_pose;
    use crate::view::normalize_view;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    fn feature_for(t: TechniqueName, gkem: f64, rng: &mut ChaCha8Rng) -> OneVOneFeature {
        let raw = archetype_pose(t, 0.005, rng);
        let pose = validate_pose(&raw).unwrap().centered();
        build_1v1_feature(&normalize_view(&pose).unwrap(), gkem, None).unwrap()
    }

    #[test]
    fn layout_and_gkem_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let f = feature_for(TechniqueName::PassiveSet, 0.78, &mut rng);
        assert_eq!(f.values().len(), 33);
        let pelvis = 2 * JointId::PELVIS.index();
        assert_eq!(&f.values()[pelvis..pelvis + 2], &[0.0, 0.0]);
        assert_eq!(f.gkem(), 0.78);
    }

    #[test]
    fn gkem_only_changes_last_element() {
        let raw = archetype_pose(TechniqueName::Spread, 0.0, &mut ChaCha8Rng::seed_from_u64(1));
        let norm = normalize_view(&validate_pose(&raw).unwrap().centered()).unwrap();
        let a = build_1v1_feature(&norm, 0.3, None).unwrap();
        let b = build_1v1_feature(&norm, 0.9, None).unwrap();
        assert_eq!(a.values()[..GKEM_INDEX], b.values()[..GKEM_INDEX]);
        assert_ne!(a.gkem(), b.gkem());
        assert!(build_1v1_feature(&norm, -0.1, None).is_err());
    }

    #[test]
    fn names_synthetic_archetypes() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let plan = [
            (TechniqueName::PassiveSet, 0.85),
            (TechniqueName::AggressiveSet, 0.45),
            (TechniqueName::Spread, 0.35),
            (TechniqueName::Smother, 0.2),
        ];
        let mut feats = Vec::new();
        let mut truth = Vec::new();
        for i in 0..100 {
            let (t, g) = plan[i % 4];
            feats.push(feature_for(t, g + 0.02 * ((i / 4) % 3) as f64, &mut rng));
            truth.push(t);
        }
        for seed in 0..20 {
            let model = fit_technique_model(&feats, seed, true).unwrap();
            let mut seen: Vec<TechniqueName> = model.name_map.to_vec();
            seen.sort();
            assert_eq!(seen, TechniqueName::ALL.to_vec());
            for (f, t) in feats.iter().zip(&truth) {
                assert_eq!(model.classify(f).unwrap(), *t, "seed {seed}");
            }
        }
    }

    #[test]
    fn representatives_are_nearest_to_centres() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let keyed: Vec<(String, OneVOneFeature)> = (0..40)
            .map(|i| {
                let t = TechniqueName::ALL[i % 4];
                (format!("s{i:03}"), feature_for(t, 0.2 + 0.15 * (i % 4) as f64, &mut rng))
            })
            .collect();
        let feats: Vec<_> = keyed.iter().map(|(_, f)| f.clone()).collect();
        let model = fit_technique_model(&feats, 3, true).unwrap();
        let reps = representative_saves(&model, &keyed).unwrap();
        assert_eq!(reps.len(), 4);

        // brute-force oracle, then remove each representative and re-check
        let space: BTreeMap<&String, Vec<f64>> = keyed
            .iter()
            .map(|(k, f)| (k, model.scaler.as_ref().unwrap().transform(f.values())))
            .collect();
        for (c, rep) in model.kmeans.centers.iter().zip(&reps) {
            let mut ranked: Vec<(&String, f64)> =
                space.iter().map(|(k, v)| (*k, sq_dist(c, v))).collect();
            ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(b.0)));
            assert_eq!(ranked[0].0, rep);

            let without: Vec<_> = keyed.iter().filter(|(k, _)| k != rep).cloned().collect();
            let again = representative_saves(&model, &without).unwrap();
            let idx = model.kmeans.centers.iter().position(|x| x == c).unwrap();
            assert_eq!(&again[idx], ranked[1].0);
        }
    }

    #[test]
    fn point_on_centre_is_representative() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let feats: Vec<OneVOneFeature> = (0..12)
            .map(|i| feature_for(TechniqueName::ALL[i % 4], 0.5, &mut rng))
            .collect();
        let model = fit_technique_model(&feats, 0, false).unwrap();
        let centre = OneVOneFeature::new(model.kmeans.centers[2].clone()).unwrap();
        let mut keyed: Vec<(usize, OneVOneFeature)> =
            feats.into_iter().enumerate().map(|(i, f)| (i + 1, f)).collect();
        keyed.push((0, centre));
        assert_eq!(representative_saves(&model, &keyed).unwrap()[2], 0);
    }

    #[test]
    fn too_few_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let feats: Vec<_> = (0..3)
            .map(|_| feature_for(TechniqueName::Spread, 0.5, &mut rng))
            .collect();
        assert!(matches!(
            fit_technique_model(&feats, 0, true),
            Err(TechniqueError::TooFewPoints { .. })
        ));
    }
}
